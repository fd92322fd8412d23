import numpy as np
import pytest

from sdda.config import SynthConfig, TrainConfig
from sdda.data.synthetic import generate_synthetic
from sdda.data.trialset import TrialSet
from sdda.models.builders import build_eegnet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_synth_cfg():
    return SynthConfig(n_classes=2, n_channels=4, n_samples=64, fs=128.0, trials_per_class=16, shift=0.3, seed=3)


@pytest.fixture(scope="session")
def tiny_sessions(tiny_synth_cfg):
    """Labeled source and target sessions, 32 trials of 4 x 64 each."""
    return generate_synthetic(tiny_synth_cfg)


@pytest.fixture(scope="session")
def tiny_spec(tiny_synth_cfg):
    cfg = tiny_synth_cfg
    return build_eegnet(cfg.n_channels, cfg.n_samples, cfg.n_classes)


@pytest.fixture
def tiny_train_cfg():
    return TrainConfig(
        model="eegnet",
        batch_size=8,
        max_epochs_stage1=3,
        max_epochs_stage2=2,
        patience=2,
        repetitions=1,
        seed=7,
        log_every=1,
    )


def random_trials(rng: np.random.Generator, n: int = 6, e: int = 3, t: int = 40, n_classes: int = 2,
                  labeled: bool = True) -> TrialSet:
    labels = np.arange(n) % n_classes if labeled else None
    return TrialSet(trials=rng.standard_normal((n, e, t)), fs=128.0, n_classes=n_classes, labels=labels,
                    participant="P1", sessions=np.ones(n, dtype=int))


@pytest.fixture
def make_trials(rng):
    return lambda **kwargs: random_trials(rng, **kwargs)
