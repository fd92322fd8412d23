"""Exponential moving standardization and per-channel scale normalization."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

logger = logging.getLogger(__name__)


@dataclass
class Diagnostics:
    """Tallies of the defined-but-degenerate cases met during preprocessing."""

    zero_channels: int = 0
    floored_eigenvalues: int = 0


def ema_standardize(trials: np.ndarray, decay: float = 0.999, eps: float = 1e-4,
                    continuous: bool = True) -> np.ndarray:
    """Standardize each channel by exponentially weighted running mean and variance.

    m_k = decay*m_{k-1} + (1-decay)*x_k, starting from the first sample;
    v_k = decay*v_{k-1} + (1-decay)*(x_k - m_k)^2, starting from zero;
    output (x_k - m_k) / sqrt(max(v_k, eps)).

    With ``continuous`` the trials of an (n, E, T) array are treated as
    consecutive pieces of one recording, so the statistics warm up once per
    session instead of once per trial.
    """
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must lie in (0, 1), got {decay}")
    x = np.asarray(trials, dtype=float)
    stacked = x.ndim == 3 and continuous
    if stacked:
        n, e, t = x.shape
        x = x.transpose(1, 0, 2).reshape(e, n * t)
    b, a = [1.0 - decay], [1.0, -decay]
    mean = signal.lfilter(b, a, x, axis=-1, zi=decay * x[..., :1])[0]
    centered = x - mean
    var = signal.lfilter(b, a, centered ** 2, axis=-1, zi=np.zeros_like(x[..., :1]))[0]
    out = centered / np.sqrt(np.maximum(var, eps))
    if stacked:
        out = out.reshape(e, n, t).transpose(1, 0, 2)
    return out


def channel_normalize(trials: np.ndarray, diagnostics: Diagnostics | None = None) -> np.ndarray:
    """Divide every channel of every trial by its maximum absolute value.

    Identically zero channels pass through unchanged and are tallied.
    """
    x = np.asarray(trials, dtype=float)
    peak = np.abs(x).max(axis=-1, keepdims=True)
    zero = peak == 0.0
    n_zero = int(zero.sum())
    if n_zero:
        logger.warning(f"⚠️ {n_zero} all-zero channel(s) passed through normalization unchanged")
        if diagnostics is not None:
            diagnostics.zero_channels += n_zero
    return x / np.where(zero, 1.0, peak)
