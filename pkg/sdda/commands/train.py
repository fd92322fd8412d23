"""sdda train: two-stage Siamese training on a source/target pair."""
import argparse
import json
import logging
from pathlib import Path

import numpy as np

from sdda.commands.common import (
    add_input_arguments,
    add_model_arguments,
    load_domain,
    method_name,
    new_manifest,
    prepare,
    train_overrides,
    training_notes,
)
from sdda.config import RunSettings
from sdda.exceptions import DivergenceError
from sdda.metrics.evaluate import evaluate, summarize
from sdda.metrics.tables import format_cell
from sdda.models.builders import build_model
from sdda.models.counting import count_params
from sdda.train.checkpoint import save_checkpoint
from sdda.train.siamese import SiameseTrainer

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="train on labeled source and unlabeled target trials")
    parser.add_argument("source", type=Path, help="labeled source domain")
    parser.add_argument("target", type=Path, help="target domain; labels, if present, are only used for reporting")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--repeat", action="store_true", help="run train.repetitions seeds instead of one")
    parser.add_argument("--track-target", action="store_true", help="record target accuracy every epoch")
    parser.add_argument("--full-schedule", action="store_true", help="disable early stopping")
    add_model_arguments(parser)
    add_input_arguments(parser)
    parser.set_defaults(handler=run, overrides=overrides)


def overrides(args: argparse.Namespace) -> dict:
    result = train_overrides(args)
    extra = {}
    if args.track_target:
        extra["track_target"] = True
    if args.full_schedule:
        extra["early_stopping"] = False
    if extra:
        result.setdefault("train", {}).update(extra)
    return result


def run(args: argparse.Namespace, settings: RunSettings, argv: list[str]) -> int:
    cfg = settings.train
    source, source_report = prepare(load_domain(args.source, args.fs, args.classes), settings, args.preprocessed)
    target, target_report = prepare(load_domain(args.target, args.fs, args.classes), settings, args.preprocessed)
    target_eval = target if target.labeled else None

    spec = build_model(cfg.model, source.n_channels, source.n_samples, source.n_classes)
    out: Path = args.out
    manifest = new_manifest("train", argv, settings)
    for path in (args.source, args.target):
        if path.is_file():
            manifest.add_input(path)
    manifest.notes |= training_notes(settings) | {
        "method": method_name(args),
        "participant": target.participant or source.participant,
        "param_count": count_params(spec).total,
        "preprocessing": {k: v.model_dump() for k, v in
                          (("source", source_report), ("target", target_report)) if v is not None},
    }

    seeds = [cfg.seed + rep for rep in range(cfg.repetitions)] if args.repeat else [cfg.seed]
    dtype = np.dtype(settings.dtype)
    reports = []
    for seed in seeds:
        run_dir = out / f"seed{seed}" if args.repeat else out
        trainer = SiameseTrainer(spec, cfg.model_copy(update={"seed": seed}), dtype)
        try:
            record = trainer.fit(source, target.without_labels(), target_eval)
        except DivergenceError as e:
            run_dir.mkdir(parents=True, exist_ok=True)
            manifest.add_output(f"record/seed{seed}", e.record.write_json(run_dir / "record.json"))
            manifest.notes["failure"] = str(e)
            manifest.write(out)
            raise
        manifest.add_output(f"checkpoint/seed{seed}",
                            save_checkpoint(run_dir / "model.ckpt", spec, trainer.store, trainer.bank))
        manifest.add_output(f"record/seed{seed}", record.write_json(run_dir / "record.json"))
        manifest.add_output(f"trace/seed{seed}", record.write_trace_csv(run_dir / "trace.csv"))
        if target_eval is not None:
            report = evaluate(trainer.store, spec, target_eval)
            reports.append(report)
            print(f"seed {seed}: target {format_cell(report.accuracy, report.kappa)}")

    if reports:
        summary = summarize(reports)
        rows = [{"method": manifest.notes["method"], "participant": manifest.notes["participant"],
                 "domain": "target", "report": r.model_dump()} for r in reports]
        eval_path = out / "eval.json"
        eval_path.write_text(json.dumps(rows, indent=2))
        manifest.add_output("eval", eval_path)
        manifest.notes["target_summary"] = summary.model_dump(exclude={"runs"})
        print(f"✅ target accuracy {format_cell(summary.accuracy, summary.kappa)} over {len(reports)} run(s)")
    manifest.write(out)
    return 0
