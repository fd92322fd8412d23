"""Windowed-sinc bandpass design and zero-lag application."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

from sdda.exceptions import FilterDesignError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    order: int
    band: tuple[float, float]
    fs: float
    window: str = "blackman"

    @property
    def group_delay(self) -> int:
        return self.order // 2

    def response(self, freqs_hz: np.ndarray) -> np.ndarray:
        """Complex frequency response evaluated by direct DTFT at ``freqs_hz``."""
        _, h = signal.freqz(self.taps, worN=np.atleast_1d(np.asarray(freqs_hz, dtype=float)), fs=self.fs)
        return h

    def magnitude_db(self, freqs_hz: np.ndarray) -> np.ndarray:
        return 20.0 * np.log10(np.maximum(np.abs(self.response(freqs_hz)), 1e-300))


def design_fir(order: int, low_hz: float, high_hz: float, fs: float, window: str = "blackman") -> FirFilter:
    """Ideal bandpass impulse response times the window, ``order + 1`` symmetric taps."""
    nyquist = fs / 2.0
    if not 0.0 < low_hz < high_hz < nyquist:
        raise FilterDesignError(
            f"band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < fs/2 = {nyquist} Hz"
        )
    if order <= 0 or order % 2:
        raise FilterDesignError(f"filter order must be a positive even integer, got {order}")
    taps = signal.firwin(order + 1, [low_hz, high_hz], window=window, pass_zero=False, fs=fs)
    # exact linear phase
    taps = 0.5 * (taps + taps[::-1])
    logger.debug(f"designed {window} bandpass [{low_hz}, {high_hz}] Hz, {order + 1} taps at {fs} Hz")
    return FirFilter(taps=taps, order=order, band=(float(low_hz), float(high_hz)), fs=float(fs), window=window)


def filter_trials(trials: np.ndarray, fir: FirFilter) -> np.ndarray:
    """Filter along time, compensating the ``order/2`` group delay.

    Each trial is edge-replicated by ``order/2`` samples on both sides, run
    through the causal filter, and the first ``order`` outputs are dropped, so
    the result keeps the input length and stays registered with it.
    """
    x = np.asarray(trials, dtype=float)
    length = x.shape[-1]
    if length < fir.order + 1:
        raise ShapeError(f"trials have {length} samples; the filter needs at least {fir.order + 1}")
    half = fir.group_delay
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    padded = np.pad(x, pad, mode="edge")
    y = signal.lfilter(fir.taps, 1.0, padded, axis=-1)
    return y[..., fir.order:]
