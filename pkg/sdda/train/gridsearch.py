"""Trade-off grid search over (lambda1, lambda2).

Cells are selected on labeled target-session accuracy. That is oracle
selection: it mirrors per-participant best-result reporting and is not a
deployable model-selection rule, so every ``GridResult`` carries the flag.
"""
import logging
import math
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, Field

from sdda.autodiff.params import ParamStore
from sdda.config import TrainConfig
from sdda.data.trialset import TrialSet
from sdda.exceptions import DivergenceError, GridSearchError
from sdda.metrics.evaluate import EvalReport, evaluate
from sdda.models.spec import ModelSpec
from sdda.train.record import RunRecord
from sdda.train.siamese import train_siamese

logger = logging.getLogger(__name__)


class GridCell(BaseModel):
    lambda1: float
    lambda2: float
    accuracies: list[Optional[float]] = Field(default_factory=list)
    failures: int = 0

    @property
    def mean(self) -> float:
        finite = [a for a in self.accuracies if a is not None]
        return float(np.mean(finite)) if finite else math.nan


class GridResult(BaseModel):
    lambda1_grid: list[float]
    lambda2_grid: list[float]
    repetitions: int
    cells: list[GridCell]
    best_lambda1: float
    best_lambda2: float
    best_accuracy: float
    oracle_selection: bool = True

    def to_frame(self) -> pd.DataFrame:
        """Mean accuracy, rows lambda1, columns lambda2."""
        frame = pd.DataFrame([{"lambda1": c.lambda1, "lambda2": c.lambda2, "accuracy": c.mean} for c in self.cells])
        return frame.pivot(index="lambda1", columns="lambda2", values="accuracy").reindex(
            index=self.lambda1_grid, columns=self.lambda2_grid)


def grid_axes(cfg: TrainConfig) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Ablated terms collapse their axis to zero."""
    return (cfg.lambda1_grid if cfg.use_center else (0.0,), cfg.lambda2_grid if cfg.use_mmd else (0.0,))


def select_best(cells: list[GridCell]) -> GridCell:
    """Highest mean accuracy; ties go to the smaller lambda2, then the smaller lambda1."""
    finite = [c for c in cells if not math.isnan(c.mean)]
    if not finite:
        raise GridSearchError("every grid cell failed", cells=len(cells))
    return min(finite, key=lambda c: (-c.mean, c.lambda2, c.lambda1))


def _run_cell(source: TrialSet, target: TrialSet, target_eval: TrialSet, spec: ModelSpec, cfg: TrainConfig,
              dtype: np.dtype) -> Optional[float]:
    try:
        store, _ = train_siamese(source, target, spec, cfg, dtype)
    except DivergenceError as e:
        logger.warning(f"⚠️ cell lambda=({cfg.lambda1}, {cfg.lambda2}) seed={cfg.seed} diverged: {e}")
        return None
    return evaluate(store, spec, target_eval).accuracy


def grid_search(source: TrialSet, target_eval: TrialSet, spec: ModelSpec, base_cfg: TrainConfig,
                n_jobs: int = 1, dtype: np.dtype = np.float64) -> GridResult:
    """Train every (cell, repetition) pair and pick the best cell.

    ``target_eval`` must be labeled; training only ever sees it without labels.
    Repetition r runs with seed ``base_cfg.seed + r``.
    """
    grid1, grid2 = grid_axes(base_cfg)
    target = target_eval.without_labels()
    jobs = [
        base_cfg.model_copy(update={"lambda1": l1, "lambda2": l2, "seed": base_cfg.seed + rep})
        for l1 in grid1 for l2 in grid2 for rep in range(base_cfg.repetitions)
    ]
    logger.info(f"grid search: {len(grid1)}x{len(grid2)} cells, {base_cfg.repetitions} repetitions, "
                f"{len(jobs)} runs on {n_jobs} worker(s)")
    accuracies = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(source, target, target_eval, spec, cfg, dtype) for cfg in jobs
    )

    cells, reps = [], base_cfg.repetitions
    for i, (l1, l2) in enumerate((l1, l2) for l1 in grid1 for l2 in grid2):
        accs = list(accuracies[i * reps:(i + 1) * reps])
        cells.append(GridCell(lambda1=l1, lambda2=l2, accuracies=accs, failures=sum(a is None for a in accs)))
    best = select_best(cells)
    logger.info(f"✅ best cell lambda=({best.lambda1}, {best.lambda2}) mean target accuracy {best.mean:.4f}")
    return GridResult(
        lambda1_grid=list(grid1),
        lambda2_grid=list(grid2),
        repetitions=reps,
        cells=cells,
        best_lambda1=best.lambda1,
        best_lambda2=best.lambda2,
        best_accuracy=best.mean,
    )


def repeat_training(source: TrialSet, target: TrialSet, spec: ModelSpec, cfg: TrainConfig,
                    target_eval: Optional[TrialSet] = None, n_jobs: int = 1,
                    dtype: np.dtype = np.float64) -> list[tuple[ParamStore, RunRecord, Optional[EvalReport]]]:
    """``cfg.repetitions`` runs with seeds ``cfg.seed + r``, merged in repetition order."""

    def one(rep: int) -> tuple[ParamStore, RunRecord, Optional[EvalReport]]:
        run_cfg = cfg.model_copy(update={"seed": cfg.seed + rep})
        store, record = train_siamese(source, target, spec, run_cfg, dtype, target_eval)
        report = evaluate(store, spec, target_eval) if target_eval is not None else None
        return store, record, report

    return Parallel(n_jobs=n_jobs)(delayed(one)(rep) for rep in range(cfg.repetitions))
