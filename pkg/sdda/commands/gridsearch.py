"""sdda gridsearch: mean target accuracy over the (lambda1, lambda2) grid."""
import argparse
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
from sdda.exceptions import LabelError
from sdda.models.builders import build_model
from sdda.train.gridsearch import grid_search

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("gridsearch", help="search the trade-off grid on labeled target accuracy")
    parser.add_argument("source", type=Path, help="labeled source domain")
    parser.add_argument("target", type=Path, help="labeled target domain (labels used only for selection)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    add_model_arguments(parser)
    add_input_arguments(parser)
    parser.set_defaults(handler=run, overrides=train_overrides)


def run(args: argparse.Namespace, settings: RunSettings, argv: list[str]) -> int:
    source, _ = prepare(load_domain(args.source, args.fs, args.classes), settings, args.preprocessed)
    target, _ = prepare(load_domain(args.target, args.fs, args.classes), settings, args.preprocessed)
    if not target.labeled:
        raise LabelError("grid search selects on target accuracy and needs a labeled target set")
    spec = build_model(settings.train.model, source.n_channels, source.n_samples, source.n_classes)

    result = grid_search(source, target, spec, settings.train, n_jobs=settings.n_jobs,
                         dtype=np.dtype(settings.dtype))

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = new_manifest("gridsearch", argv, settings)
    for path in (args.source, args.target):
        if path.is_file():
            manifest.add_input(path)
    grid_csv = out / "grid.csv"
    result.to_frame().to_csv(grid_csv)
    grid_json = out / "grid.json"
    grid_json.write_text(result.model_dump_json(indent=2))
    manifest.add_output("grid_csv", grid_csv)
    manifest.add_output("grid", grid_json)
    manifest.notes |= training_notes(settings) | {
        "method": method_name(args),
        "oracle_selection": True,
        "selection": "labeled target-session accuracy; not a deployable model-selection rule",
        "best": {"lambda1": result.best_lambda1, "lambda2": result.best_lambda2,
                 "accuracy": result.best_accuracy},
    }
    manifest.write(out)
    print(f"✅ best lambda1={result.best_lambda1} lambda2={result.best_lambda2} "
          f"target accuracy {100 * result.best_accuracy:.2f}% (oracle selection)")
    return 0
