"""sdda preprocess: filter, standardize, normalize and align each domain on its own."""
import argparse
import json
import logging
from pathlib import Path

import numpy as np

from sdda.commands.common import add_input_arguments, load_domain, new_manifest
from sdda.config import RunSettings
from sdda.data.container import write_container
from sdda.data.splits import POLICIES, split_sessions
from sdda.exceptions import ConfigError
from sdda.preproc.alignment import mean_covariance
from sdda.preproc.pipeline import preprocess_domain

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("preprocess", help="apply the preprocessing pipeline per domain")
    parser.add_argument("inputs", nargs="+", type=Path, help="containers or CSV directories, one per domain")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--split", choices=sorted(POLICIES),
                        help="split a single session-tagged input into source and target first")
    parser.add_argument("--no-filter", action="store_true", help="skip the bandpass filter")
    parser.add_argument("--no-ema", action="store_true", help="skip exponential moving standardization")
    parser.add_argument("--no-normalize", action="store_true", help="skip per-channel normalization")
    parser.add_argument("--no-align", action="store_true", help="skip Euclidean alignment")
    add_input_arguments(parser)
    parser.set_defaults(handler=run, overrides=overrides)


def overrides(args: argparse.Namespace) -> dict:
    preproc = {stage: False for stage in ("filter", "ema", "normalize", "align") if getattr(args, f"no_{stage}")}
    return {"preproc": preproc} if preproc else {}


def run(args: argparse.Namespace, settings: RunSettings, argv: list[str]) -> int:
    domains = {}
    if args.split:
        if len(args.inputs) != 1:
            raise ConfigError("--split takes exactly one input")
        source, target = split_sessions(load_domain(args.inputs[0], args.fs, args.classes), args.split)
        domains = {"source": source, "target": target}
    else:
        for path in args.inputs:
            domains[path.stem] = load_domain(path, args.fs, args.classes)

    out: Path = args.out
    manifest = new_manifest("preprocess", argv, settings)
    for path in args.inputs:
        if path.is_file():
            manifest.add_input(path)

    summary = {}
    for name, trial_set in domains.items():
        processed, report = preprocess_domain(trial_set, settings.preproc)
        deviation = float(np.linalg.norm(mean_covariance(processed.trials) - np.eye(processed.n_channels)))
        summary[name] = report.model_dump() | {"mean_covariance_deviation": deviation}
        manifest.add_output(name, write_container(processed, out / f"{name}.trl"))
        logger.info(f"{name}: {' -> '.join(report.stages) or 'no stages'}, "
                    f"||mean cov - I||_F = {deviation:.3e}")

    report_path = out / "preprocess.json"
    report_path.write_text(json.dumps(summary, indent=2))
    manifest.add_output("report", report_path)
    manifest.write(out)
    print(f"✅ preprocessed {len(domains)} domain(s) into {out}")
    return 0
