"""The trial collection every stage passes around."""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from sdda.exceptions import LabelError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class TrialSet:
    """``n`` trials of ``E`` channels by ``T`` samples, optionally labeled.

    ``sessions`` tags every trial with the recording session it came from.
    """

    trials: np.ndarray
    fs: float
    n_classes: int
    labels: Optional[np.ndarray] = None
    participant: str = ""
    sessions: Optional[np.ndarray] = None

    def __post_init__(self):
        self.trials = np.asarray(self.trials)
        if self.trials.ndim != 3:
            raise ShapeError(f"trials must be shaped (n, E, T), got {self.trials.shape}")
        if self.n_classes < 2:
            raise ValueError(f"a trial set needs at least 2 classes, got {self.n_classes}")
        n = self.trials.shape[0]
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ShapeError(f"{n} trials but labels shaped {self.labels.shape}")
            bad = (self.labels < 0) | (self.labels >= self.n_classes)
            if bad.any():
                raise LabelError(
                    f"{int(bad.sum())} label(s) outside [0, {self.n_classes})",
                    first_bad_index=int(np.flatnonzero(bad)[0]),
                )
        if self.sessions is not None:
            self.sessions = np.asarray(self.sessions, dtype=np.int64)
            if self.sessions.shape != (n,):
                raise ShapeError(f"{n} trials but session tags shaped {self.sessions.shape}")

    @property
    def n_trials(self) -> int:
        return self.trials.shape[0]

    @property
    def n_channels(self) -> int:
        return self.trials.shape[1]

    @property
    def n_samples(self) -> int:
        return self.trials.shape[2]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def __len__(self) -> int:
        return self.n_trials

    def replace(self, **changes: Any) -> "TrialSet":
        return dataclasses.replace(self, **changes)

    def subset(self, index: np.ndarray) -> "TrialSet":
        index = np.asarray(index)
        return self.replace(
            trials=self.trials[index],
            labels=None if self.labels is None else self.labels[index],
            sessions=None if self.sessions is None else self.sessions[index],
        )

    def without_labels(self) -> "TrialSet":
        return self.replace(labels=None)

    def class_counts(self) -> np.ndarray:
        if self.labels is None:
            raise LabelError("trial set is unlabeled")
        return np.bincount(self.labels, minlength=self.n_classes)
