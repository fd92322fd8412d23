"""Import trials from a directory of CSV files.

One headerless CSV per trial, one row per channel. An optional ``labels.csv``
with columns ``file,label`` (and optionally ``session``) lists the trials in
order; without it every other CSV in the directory is read in name order and
the set is unlabeled.
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from sdda.data.trialset import TrialSet
from sdda.exceptions import CsvImportError

logger = logging.getLogger(__name__)

LABELS_FILE = "labels.csv"


def _read_trial(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path, header=None, dtype=float)
    except pd.errors.ParserError as e:
        raise CsvImportError(f"{path.name}: ragged rows ({e})", file=str(path)) from e
    except pd.errors.EmptyDataError as e:
        raise CsvImportError(f"{path.name}: file is empty", file=str(path)) from e
    except ValueError as e:
        raise CsvImportError(f"{path.name}: non-numeric value ({e})", file=str(path)) from e
    if frame.isna().any().any():
        raise CsvImportError(f"{path.name}: ragged rows (channels of unequal length)", file=str(path))
    return frame.to_numpy()


def import_csv(directory: Path | str, fs: float = 250.0, n_classes: Optional[int] = None,
               participant: str = "") -> TrialSet:
    directory = Path(directory)
    if not directory.is_dir():
        raise CsvImportError(f"{directory} is not a directory")
    index_path = directory / LABELS_FILE
    labels = sessions = None
    if index_path.is_file():
        index = pd.read_csv(index_path)
        missing = {"file", "label"} - set(index.columns)
        if missing:
            raise CsvImportError(f"{LABELS_FILE}: missing column(s) {sorted(missing)}", file=str(index_path))
        files = [directory / name for name in index["file"]]
        labels = index["label"].to_numpy(dtype=np.int64)
        if "session" in index.columns:
            sessions = index["session"].to_numpy(dtype=np.int64)
    else:
        files = sorted(p for p in directory.glob("*.csv") if p.name != LABELS_FILE)
    if not files:
        raise CsvImportError(f"{directory}: no trial files")

    trials = []
    for path in files:
        if not path.is_file():
            raise CsvImportError(f"{path.name}: listed in {LABELS_FILE} but not found", file=str(path))
        trial = _read_trial(path)
        if trials and trial.shape != trials[0].shape:
            raise CsvImportError(
                f"{path.name}: shape {trial.shape} differs from {files[0].name} {trials[0].shape}", file=str(path)
            )
        trials.append(trial)

    if n_classes is None:
        n_classes = max(2, int(labels.max()) + 1) if labels is not None and labels.size else 2
    logger.info(f"imported {len(trials)} trials of shape {trials[0].shape} from {directory}"
                f"{'' if labels is not None else ' (unlabeled)'}")
    return TrialSet(trials=np.stack(trials), fs=fs, n_classes=n_classes, labels=labels,
                    participant=participant, sessions=sessions)
