"""Siamese two-stage training, optimizer and trade-off grid search."""
from sdda.train.checkpoint import load_checkpoint, save_checkpoint
from sdda.train.gridsearch import GridCell, GridResult, grid_axes, grid_search, repeat_training, select_best
from sdda.train.optim import AdamState, AdamW, adamw_step
from sdda.train.record import EpochLog, RunRecord
from sdda.train.siamese import SiameseTrainer, train_siamese, train_vanilla

__all__ = [
    "AdamState",
    "AdamW",
    "EpochLog",
    "GridCell",
    "GridResult",
    "RunRecord",
    "SiameseTrainer",
    "adamw_step",
    "grid_axes",
    "grid_search",
    "load_checkpoint",
    "repeat_training",
    "save_checkpoint",
    "select_best",
    "train_siamese",
    "train_vanilla",
]
