"""Evaluation of a trained network on a labeled trial set."""
import logging
from typing import Sequence

import numpy as np
from pydantic import BaseModel
from sklearn.metrics import confusion_matrix

from sdda.autodiff.params import ParamStore
from sdda.data.trialset import TrialSet
from sdda.exceptions import LabelError, ShapeError
from sdda.metrics.kappa import kappa
from sdda.models.network import Network
from sdda.models.spec import ModelSpec

logger = logging.getLogger(__name__)


class EvalReport(BaseModel):
    accuracy: float
    kappa: float
    confusion: list[list[int]]
    n_trials: int
    n_classes: int


class SummaryReport(BaseModel):
    """Mean over repetitions."""

    accuracy: float
    kappa: float
    accuracy_std: float
    runs: list[EvalReport]


def report_from_predictions(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> EvalReport:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise ShapeError(f"predictions {y_pred.shape} and labels {y_true.shape} must be equal non-empty vectors")
    cm = confusion_matrix(y_true, y_pred, labels=np.arange(n_classes))
    acc = float(np.trace(cm) / cm.sum())
    return EvalReport(accuracy=acc, kappa=kappa(acc, n_classes), confusion=cm.tolist(),
                      n_trials=int(y_true.size), n_classes=n_classes)


def predict(store: ParamStore, spec: ModelSpec, trials: np.ndarray, batch_size: int = 128) -> np.ndarray:
    """Argmax class per trial, ties to the lowest index."""
    logits = Network(spec, store).predict_logits(np.asarray(trials, dtype=store.dtype), batch_size)
    return logits.argmax(axis=1)


def evaluate(store: ParamStore, spec: ModelSpec, trial_set: TrialSet, batch_size: int = 128) -> EvalReport:
    """Eval-mode accuracy, kappa and confusion matrix."""
    if not trial_set.labeled:
        raise LabelError("evaluation needs a labeled trial set")
    if (trial_set.n_channels, trial_set.n_samples) != spec.input_shape:
        raise ShapeError(f"{spec.name} was built for (E, T) = {spec.input_shape}, trials are "
                         f"({trial_set.n_channels}, {trial_set.n_samples})")
    report = report_from_predictions(trial_set.labels, predict(store, spec, trial_set.trials, batch_size),
                                     spec.n_classes)
    logger.debug(f"evaluated {report.n_trials} trials: acc={report.accuracy:.4f} kappa={report.kappa:.3f}")
    return report


def summarize(reports: Sequence[EvalReport]) -> SummaryReport:
    if not reports:
        raise ValueError("nothing to summarize")
    accs = np.array([r.accuracy for r in reports])
    return SummaryReport(
        accuracy=float(accs.mean()),
        kappa=float(np.mean([r.kappa for r in reports])),
        accuracy_std=float(accs.std()),
        runs=list(reports),
    )
