"""Run configuration.

Every command resolves one ``RunSettings``: field defaults, overridden by a
TOML file (``--config``), overridden by command-line flags. Environment
variables are deliberately not a source.
"""
import logging
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict, TomlConfigSettingsSource

from sdda.exceptions import ConfigError

logger = logging.getLogger(__name__)

LAMBDA1_GRID = (0.0, 0.2, 1.0, 2.0, 10.0, 15.0)
LAMBDA2_GRID = (0.0, 0.02, 0.05, 0.1, 0.2, 0.5)
PASSBAND = (4.0, 38.0)
DEFAULT_LEARNING_RATES = {"eegnet": 1e-3, "convnet": 1e-4}

# (use_preproc_invariants, use_center, use_mmd)
VARIANTS: dict[str, tuple[bool, bool, bool]] = {
    "vanilla": (False, False, False),
    "vanilla+pre": (True, False, False),
    "vanilla+center": (False, True, False),
    "pre+center": (True, True, False),
    "pre+mmd": (True, False, True),
    "center+mmd": (False, True, True),
    "sdda": (True, True, True),
}

ABLATIONS = {"no-preproc": "use_preproc_invariants", "no-center": "use_center", "no-mmd": "use_mmd"}


class PreprocSwitches(BaseModel):
    """Which preprocessing stages run, and their constants."""

    filter: bool = True
    ema: bool = True
    normalize: bool = True
    align: bool = True
    filter_order: int = 200
    low_hz: float = PASSBAND[0]
    high_hz: float = PASSBAND[1]
    window: str = "blackman"
    ema_decay: float = 0.999
    ema_eps: float = 1e-4

    @field_validator("ema_decay")
    @classmethod
    def _decay_open_unit(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("ema_decay must lie in (0, 1)")
        return v

    @field_validator("filter_order")
    @classmethod
    def _even_order(cls, v: int) -> int:
        if v <= 0 or v % 2:
            raise ValueError("filter_order must be a positive even integer")
        return v


class TrainConfig(BaseModel):
    """Hyperparameters of one Siamese training run."""

    model: Literal["eegnet", "convnet"] = "eegnet"
    lambda1: float = Field(1.0, ge=0.0, description="center-loss weight")
    lambda2: float = Field(0.2, ge=0.0, description="MMD weight")
    learning_rate: Optional[float] = Field(None, gt=0.0, description="defaults per model when unset")
    batch_size: int = Field(16, ge=2)
    center_rate: float = Field(0.5, gt=0.0, le=1.0)
    weight_decay: float = Field(0.01, ge=0.0)
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0.0)
    max_epochs_stage1: int = Field(500, ge=1)
    max_epochs_stage2: int = Field(300, ge=0)
    patience: int = Field(80, ge=1)
    early_stopping: bool = True
    validation_fraction: float = 0.2
    seed: int = Field(0, ge=0)
    use_preproc_invariants: bool = True
    use_center: bool = True
    use_mmd: bool = True
    repetitions: int = Field(5, ge=1)
    mmd_bandwidth: Optional[float] = Field(None, gt=0.0, description="fixed sigma^2; median heuristic when unset")
    mmd_kernel_factors: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    center_metric: Literal["cosine", "euclidean"] = "cosine"
    track_target: bool = False
    log_every: int = Field(10, ge=1)
    lambda1_grid: tuple[float, ...] = LAMBDA1_GRID
    lambda2_grid: tuple[float, ...] = LAMBDA2_GRID

    @field_validator("validation_fraction")
    @classmethod
    def _fraction_open_unit(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        return v

    @field_validator("betas")
    @classmethod
    def _betas_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in v):
            raise ValueError("betas must lie in [0, 1)")
        return v

    @model_validator(mode="after")
    def _warn_euclidean(self) -> "TrainConfig":
        if self.center_metric == "euclidean":
            logger.warning("⚠️ euclidean center loss is experimental and known to degrade accuracy")
        return self

    @property
    def lr(self) -> float:
        return self.learning_rate if self.learning_rate is not None else DEFAULT_LEARNING_RATES[self.model]

    @property
    def effective_lambdas(self) -> tuple[float, float]:
        """Trade-offs after the ablation switches are applied."""
        return (self.lambda1 if self.use_center else 0.0, self.lambda2 if self.use_mmd else 0.0)

    def with_variant(self, name: str) -> "TrainConfig":
        try:
            pre, center, mmd = VARIANTS[name]
        except KeyError:
            raise ConfigError(f"unknown variant {name!r}; known: {sorted(VARIANTS)}") from None
        return self.model_copy(update={"use_preproc_invariants": pre, "use_center": center, "use_mmd": mmd})

    def with_ablations(self, names: list[str]) -> "TrainConfig":
        update = {}
        for name in names:
            if name not in ABLATIONS:
                raise ConfigError(f"unknown ablation {name!r}; known: {sorted(ABLATIONS)}")
            update[ABLATIONS[name]] = False
        return self.model_copy(update=update)


class SynthConfig(BaseModel):
    """Synthetic motor-imagery sessions with a controllable session shift."""

    n_classes: int = Field(4, ge=2)
    n_channels: int = Field(8, ge=2)
    n_samples: int = Field(512, ge=64)
    fs: float = Field(128.0, gt=0.0)
    trials_per_class: int = Field(48, ge=1)
    burst_band: tuple[float, float] = (8.0, 13.0)
    erd_depth: float = Field(0.8, ge=0.0, le=1.0)
    noise_level: float = Field(0.5, ge=0.0)
    mixing_spread: float = Field(0.3, ge=0.0)
    shift: float = Field(0.5, ge=0.0, description="session-shift strength epsilon")
    gain_drift: float = Field(0.3, ge=0.0)
    target_noise_gain: float = Field(0.5, ge=0.0)
    participant: str = "S01"
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _band_inside_passband(self) -> "SynthConfig":
        low, high = self.burst_band
        if not 0.0 < low < high < self.fs / 2:
            raise ValueError(f"burst_band {self.burst_band} must lie inside (0, fs/2={self.fs / 2})")
        if low < PASSBAND[0] or high > PASSBAND[1]:
            raise ValueError(f"burst_band {self.burst_band} must lie inside the preprocessing passband {PASSBAND}")
        return self

    @model_validator(mode="after")
    def _one_channel_per_class(self) -> "SynthConfig":
        # each class desynchronizes its own latent channel
        if self.n_classes > self.n_channels:
            raise ValueError(f"n_classes={self.n_classes} exceeds n_channels={self.n_channels}; "
                             f"every class needs its own ERD channel")
        return self


class RunSettings(BaseSettings):
    """Resolved configuration for one command invocation."""

    model_config = SettingsConfigDict(extra="forbid")

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    dtype: Literal["float64", "float32"] = "float64"
    n_jobs: int = 1
    preproc: PreprocSwitches = PreprocSwitches()
    train: TrainConfig = TrainConfig()
    synth: SynthConfig = SynthConfig()

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, TomlConfigSettingsSource(settings_cls)


def load_settings(config_file: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None) -> RunSettings:
    """Resolve settings from an optional TOML file and flag overrides."""
    settings_cls: type[RunSettings] = RunSettings
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        settings_cls = type(
            "FileRunSettings",
            (RunSettings,),
            {"model_config": SettingsConfigDict(extra="forbid", toml_file=str(path))},
        )
    try:
        return settings_cls(**(overrides or {}))
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
