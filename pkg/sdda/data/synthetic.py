"""Synthetic motor-imagery sessions with a controllable session shift.

Every class owns one latent source whose band-limited rhythm it attenuates
(desynchronization). Latent sources plus white background noise are mixed
onto the electrodes. The target session perturbs the mixing matrix, drifts
channel gains and raises the noise floor, all scaled by ``shift``; with
``shift == 0`` both sessions come from the same process.
"""
import logging

import numpy as np
from scipy import signal
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import StratifiedKFold, cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from sdda.config import SynthConfig
from sdda.data.trialset import TrialSet
from sdda.losses.mmd import median_bandwidths, mmd2
from sdda.rng import SeedBank

logger = logging.getLogger(__name__)

SOURCE_SESSION = 1
TARGET_SESSION = 2
AMPLITUDE_JITTER = 0.2


def _band_limited(rng: np.random.Generator, shape: tuple[int, ...], sos: np.ndarray) -> np.ndarray:
    x = signal.sosfiltfilt(sos, rng.standard_normal(shape), axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def _session(cfg: SynthConfig, mixing: np.ndarray, noise_level: float, rng: np.random.Generator,
             session: int) -> TrialSet:
    e, t = cfg.n_channels, cfg.n_samples
    sos = signal.butter(4, cfg.burst_band, btype="bandpass", fs=cfg.fs, output="sos")
    labels = rng.permutation(np.repeat(np.arange(cfg.n_classes), cfg.trials_per_class))
    n = len(labels)
    rhythm = _band_limited(rng, (n, e, t), sos)
    amplitude = np.exp(AMPLITUDE_JITTER * rng.standard_normal((n, e, 1)))
    designated = labels
    amplitude[np.arange(n), designated] *= 1.0 - cfg.erd_depth
    latent = amplitude * rhythm + noise_level * rng.standard_normal((n, e, t))
    trials = np.einsum("ef,nft->net", mixing, latent)
    return TrialSet(
        trials=trials,
        fs=cfg.fs,
        n_classes=cfg.n_classes,
        labels=labels,
        participant=cfg.participant,
        sessions=np.full(n, session),
    )


def generate_synthetic(cfg: SynthConfig) -> tuple[TrialSet, TrialSet]:
    """Labeled source and target sessions, class-balanced."""
    seeds = SeedBank(cfg.seed)
    e = cfg.n_channels
    structure = seeds.generator("synth/structure")
    mixing = np.eye(e) + cfg.mixing_spread * structure.standard_normal((e, e))
    perturbation = structure.standard_normal((e, e))
    drift = structure.standard_normal(e)

    target_mixing = (np.eye(e) + cfg.shift * perturbation) @ mixing
    gains = np.exp(cfg.gain_drift * cfg.shift * drift)
    target_mixing = gains[:, None] * target_mixing
    target_noise = cfg.noise_level * (1.0 + cfg.target_noise_gain * cfg.shift)

    source = _session(cfg, mixing, cfg.noise_level, seeds.generator("synth/source"), SOURCE_SESSION)
    target = _session(cfg, target_mixing, target_noise, seeds.generator("synth/target"), TARGET_SESSION)
    logger.info(f"generated {source.n_trials}+{target.n_trials} synthetic trials "
                f"(E={e}, T={cfg.n_samples}, C={cfg.n_classes}, shift={cfg.shift})")
    return source, target


def bandpower_features(trial_set: TrialSet, band: tuple[float, float] = (8.0, 13.0)) -> np.ndarray:
    """Log variance of every channel after a zero-phase bandpass."""
    sos = signal.butter(4, band, btype="bandpass", fs=trial_set.fs, output="sos")
    filtered = signal.sosfiltfilt(sos, np.asarray(trial_set.trials, dtype=float), axis=-1)
    return np.log(filtered.var(axis=-1) + 1e-12)


def probe_accuracy(train: TrialSet, test: TrialSet | None = None, band: tuple[float, float] = (8.0, 13.0),
                   folds: int = 5, seed: int = 0) -> float:
    """Logistic-regression accuracy on band-power features.

    Cross-validated on ``train`` alone, or fit on ``train`` and scored on ``test``.
    """
    probe = make_pipeline(StandardScaler(), LogisticRegression(max_iter=1000))
    x = bandpower_features(train, band)
    if test is None:
        cv = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
        return float(cross_val_score(probe, x, train.labels, cv=cv).mean())
    probe.fit(x, train.labels)
    return float(probe.score(bandpower_features(test, band), test.labels))


def session_shift_pvalue(source: TrialSet, target: TrialSet, band: tuple[float, float] = (8.0, 13.0),
                         n_permutations: int = 200, seed: int = 0) -> float:
    """Permutation-test p-value of the MMD between the two sessions' band-power features."""
    xs, xt = bandpower_features(source, band), bandpower_features(target, band)
    pooled = np.concatenate([xs, xt])
    pooled = (pooled - pooled.mean(axis=0)) / (pooled.std(axis=0) + 1e-12)
    sigma2 = median_bandwidths(pooled)
    n_s = len(xs)
    observed = mmd2(pooled[:n_s], pooled[n_s:], sigma2)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(n_permutations):
        order = rng.permutation(len(pooled))
        if mmd2(pooled[order[:n_s]], pooled[order[n_s:]], sigma2) >= observed:
            exceed += 1
    return (exceed + 1) / (n_permutations + 1)
