"""Helpers shared by the subcommands."""
import argparse
import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np

from sdda.config import ABLATIONS, VARIANTS, PreprocSwitches, RunSettings, TrainConfig
from sdda.data.container import read_container
from sdda.data.csv_import import import_csv
from sdda.data.trialset import TrialSet
from sdda.exceptions import ConfigError
from sdda.manifest import MANIFEST_NAME, RunManifest, load_manifest
from sdda.preproc.pipeline import PreprocReport, invariant_switches, preprocess_domain

logger = logging.getLogger(__name__)


def deep_merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def set_if(target: dict[str, Any], key: str, value: Any) -> None:
    if value is not None:
        target[key] = value


def add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fs", type=float, default=250.0, help="sample rate for CSV directory inputs")
    parser.add_argument("--classes", type=int, default=None, help="class count for CSV directory inputs")


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags that select the training configuration."""
    parser.add_argument("--model", choices=["eegnet", "convnet"], help="backbone network")
    parser.add_argument("--lambda1", type=float, help="center-loss weight")
    parser.add_argument("--lambda2", type=float, help="MMD weight")
    parser.add_argument("--variant", choices=sorted(VARIANTS), help="named switch preset")
    parser.add_argument("--ablate", action="append", choices=sorted(ABLATIONS), default=[],
                        help="remove one component (repeatable)")
    parser.add_argument("--seed", type=int, help="root seed")
    parser.add_argument("--lr", type=float, help="learning rate (defaults per model)")
    parser.add_argument("--epochs1", type=int, help="max epochs in stage 1")
    parser.add_argument("--epochs2", type=int, help="max epochs in stage 2")
    parser.add_argument("--repetitions", type=int, help="independent seeds per configuration")
    parser.add_argument("--preprocessed", action="store_true",
                        help="inputs already went through `sdda preprocess`")


def train_overrides(args: argparse.Namespace) -> dict[str, Any]:
    train: dict[str, Any] = {}
    set_if(train, "model", args.model)
    set_if(train, "lambda1", args.lambda1)
    set_if(train, "lambda2", args.lambda2)
    set_if(train, "seed", args.seed)
    set_if(train, "learning_rate", args.lr)
    set_if(train, "max_epochs_stage1", args.epochs1)
    set_if(train, "max_epochs_stage2", args.epochs2)
    set_if(train, "repetitions", args.repetitions)
    if args.variant:
        pre, center, mmd = VARIANTS[args.variant]
        train.update(use_preproc_invariants=pre, use_center=center, use_mmd=mmd)
    for name in args.ablate:
        train[ABLATIONS[name]] = False
    return {"train": train} if train else {}


def method_name(args: argparse.Namespace) -> str:
    if getattr(args, "variant", None):
        return args.variant
    ablate = getattr(args, "ablate", [])
    return "sdda" + "".join(f"/{a}" for a in sorted(ablate))


def load_domain(path: Path | str, fs: float = 250.0, n_classes: Optional[int] = None) -> TrialSet:
    """A container file or a directory of per-trial CSV files."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input not found: {path}")
    if path.is_dir():
        return import_csv(path, fs=fs, n_classes=n_classes, participant=path.name)
    return read_container(path)


def prepare(trial_set: TrialSet, settings: RunSettings, preprocessed: bool) -> tuple[TrialSet, Optional[PreprocReport]]:
    """Apply the run's preprocessing to one domain and cast to the run dtype."""
    report = None
    if not preprocessed:
        switches = invariant_switches(settings.preproc, settings.train.use_preproc_invariants)
        trial_set, report = preprocess_domain(trial_set, switches)
    return trial_set.replace(trials=np.asarray(trial_set.trials, dtype=settings.dtype)), report


def new_manifest(command: str, argv: list[str], settings: RunSettings, seed: Optional[int] = None) -> RunManifest:
    return RunManifest(
        command=command,
        argv=list(argv),
        settings=settings.model_dump(mode="json"),
        seed=settings.train.seed if seed is None else seed,
    )


def training_notes(settings: RunSettings) -> dict[str, Any]:
    cfg = settings.train
    return {
        "center_update_space": "l2-normalized embeddings",
        "mmd_embeddings": "both domains: eval-mode batch norm, train-mode dropout",
        "effective_lambdas": list(cfg.effective_lambdas),
        "learning_rate": cfg.lr,
        "stage2_start": "stage1_best_checkpoint",
    }


def training_manifest(checkpoint: Path) -> Optional[RunManifest]:
    """The manifest of the run that wrote ``checkpoint``, if it sits next to it."""
    for directory in (checkpoint.parent, checkpoint.parent.parent):
        if (directory / MANIFEST_NAME).is_file():
            manifest = load_manifest(directory)
            if manifest.command == "train":
                return manifest
    return None


def settings_for_checkpoint(checkpoint: Path, settings: RunSettings) -> tuple[RunSettings, Optional[RunManifest]]:
    """Preprocess exactly as the training run did when its manifest is available."""
    trained = training_manifest(checkpoint)
    if trained is None:
        logger.warning(f"⚠️ no training manifest next to {checkpoint}; using the current preprocessing settings")
        return settings, None
    return settings.model_copy(update={
        "preproc": PreprocSwitches.model_validate(trained.settings["preproc"]),
        "train": TrainConfig.model_validate(trained.settings["train"]),
    }), trained
