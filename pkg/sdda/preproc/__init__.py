"""Domain invariants: bandpass filtering, moving standardization, scale normalization, alignment."""
from sdda.preproc.alignment import AlignmentState, apply_alignment, fit_alignment, mean_covariance
from sdda.preproc.filters import FirFilter, design_fir, filter_trials
from sdda.preproc.pipeline import (
    PreprocReport,
    build_pipeline,
    invariant_switches,
    preprocess_domain,
    preprocess_pair,
)
from sdda.preproc.standardize import Diagnostics, channel_normalize, ema_standardize

__all__ = [
    "AlignmentState",
    "Diagnostics",
    "FirFilter",
    "PreprocReport",
    "apply_alignment",
    "build_pipeline",
    "channel_normalize",
    "design_fir",
    "ema_standardize",
    "filter_trials",
    "fit_alignment",
    "invariant_switches",
    "mean_covariance",
    "preprocess_domain",
    "preprocess_pair",
]
