"""sdda eval: accuracy, kappa and confusion matrix of a checkpoint on labeled sets."""
import argparse
import json
import logging
from pathlib import Path

from sdda.commands.common import add_input_arguments, load_domain, new_manifest, prepare, settings_for_checkpoint
from sdda.config import RunSettings
from sdda.metrics.evaluate import evaluate
from sdda.metrics.tables import format_cell
from sdda.train.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("eval", help="evaluate a checkpoint on labeled trial sets")
    parser.add_argument("checkpoint", type=Path, help="model.ckpt written by `sdda train`")
    parser.add_argument("data", nargs="+", type=Path, help="labeled trial sets")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--preprocessed", action="store_true", help="inputs already went through `sdda preprocess`")
    parser.add_argument("--method", help="row name in report tables (defaults to the training run's)")
    add_input_arguments(parser)
    parser.set_defaults(handler=run, overrides=lambda args: {})


def run(args: argparse.Namespace, settings: RunSettings, argv: list[str]) -> int:
    spec, store, _ = load_checkpoint(args.checkpoint)
    run_settings, trained = settings_for_checkpoint(args.checkpoint, settings)
    method = args.method or (trained.notes.get("method") if trained else None) or spec.name

    out: Path = args.out
    manifest = new_manifest("eval", argv, run_settings)
    manifest.add_input(args.checkpoint)
    rows = []
    for path in args.data:
        if path.is_file():
            manifest.add_input(path)
        trial_set, _ = prepare(load_domain(path, args.fs, args.classes), run_settings, args.preprocessed)
        trial_set = trial_set.replace(trials=trial_set.trials.astype(store.dtype))
        report = evaluate(store, spec, trial_set)
        rows.append({"method": method, "participant": trial_set.participant, "domain": path.stem,
                     "report": report.model_dump()})
        print(f"{path.stem}: {format_cell(report.accuracy, report.kappa)} on {report.n_trials} trials")

    eval_path = out / "eval.json"
    out.mkdir(parents=True, exist_ok=True)
    eval_path.write_text(json.dumps(rows, indent=2))
    manifest.add_output("eval", eval_path)
    manifest.notes["method"] = method
    manifest.write(out)
    print(f"✅ evaluation written to {eval_path}")
    return 0
