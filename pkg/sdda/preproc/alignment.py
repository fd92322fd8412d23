"""Euclidean alignment: whiten a domain by its mean trial covariance."""
import logging
from dataclasses import dataclass

import numpy as np

from sdda.exceptions import ShapeError

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class AlignmentState:
    mean_cov: np.ndarray
    whitener: np.ndarray
    n_trials: int
    n_floored: int = 0

    @property
    def n_channels(self) -> int:
        return self.mean_cov.shape[0]

    @property
    def floored(self) -> bool:
        return self.n_floored > 0


def mean_covariance(trials: np.ndarray) -> np.ndarray:
    """(1/n) sum_i x_i x_i^T over an (n, E, T) array."""
    x = np.asarray(trials, dtype=float)
    if x.ndim != 3:
        raise ShapeError(f"expected trials shaped (n, E, T), got {x.shape}")
    if x.shape[0] == 0:
        raise ShapeError("cannot average covariances of an empty trial set")
    r = np.einsum("net,nft->ef", x, x, optimize=True) / x.shape[0]
    return 0.5 * (r + r.T)


def fit_alignment(trials: np.ndarray) -> AlignmentState:
    """Mean covariance and its inverse square root, eigenvalues floored at 1e-10 of the largest."""
    r = mean_covariance(trials)
    eigvals, eigvecs = np.linalg.eigh(r)
    top = float(eigvals.max())
    if top <= 0.0:
        logger.warning("⚠️ mean covariance is zero; alignment falls back to the identity")
        n = r.shape[0]
        return AlignmentState(mean_cov=r, whitener=np.eye(n), n_trials=len(trials), n_floored=n)
    floor = EIGEN_FLOOR * top
    low = eigvals < floor
    n_floored = int(low.sum())
    if n_floored:
        logger.warning(f"⚠️ floored {n_floored} of {len(eigvals)} covariance eigenvalue(s) at {floor:.3e}")
    inv_sqrt = 1.0 / np.sqrt(np.where(low, floor, eigvals))
    whitener = (eigvecs * inv_sqrt) @ eigvecs.T
    whitener = 0.5 * (whitener + whitener.T)
    return AlignmentState(mean_cov=r, whitener=whitener, n_trials=len(trials), n_floored=n_floored)


def apply_alignment(trials: np.ndarray, state: AlignmentState) -> np.ndarray:
    x = np.asarray(trials, dtype=float)
    if x.ndim != 3 or x.shape[1] != state.n_channels:
        raise ShapeError(
            f"alignment was fitted on {state.n_channels} channels, trials are shaped {x.shape} (dimension 1)"
        )
    return np.einsum("ef,nft->net", state.whitener, x, optimize=True)
