"""What a training run leaves behind."""
from pathlib import Path
from typing import Any, Literal, Optional

import pandas as pd
from pydantic import BaseModel, Field


class EpochLog(BaseModel):
    stage: int
    epoch: int
    train_loss: float
    softmax_loss: float
    center_loss: Optional[float] = None
    mmd_loss: Optional[float] = None
    train_acc: float
    val_loss: Optional[float] = None
    val_acc: Optional[float] = None
    source_eval_loss: Optional[float] = None
    target_acc: Optional[float] = None


class RunRecord(BaseModel):
    """Per-epoch traces plus the decisions the run took."""

    config: dict[str, Any]
    seed: int
    status: Literal["running", "completed", "diverged"] = "running"
    epochs: list[EpochLog] = Field(default_factory=list)
    best_val_loss: Optional[float] = None
    best_epoch: Optional[int] = None
    stage1_epochs: int = 0
    stage2_epochs: int = 0
    stage2_start: str = "stage1_best_checkpoint"
    center_update_space: str = "l2-normalized embeddings"
    mmd_embeddings: str = "both domains: eval-mode batch norm, train-mode dropout"
    final: dict[str, float] = Field(default_factory=dict)
    failure: Optional[str] = None
    wall_time_s: float = 0.0

    def loss_trace(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.model_dump() for e in self.epochs], columns=list(EpochLog.model_fields))

    def write_trace_csv(self, path: Path | str) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False)
        return path

    def write_json(self, path: Path | str) -> Path:
        path = Path(path)
        path.write_text(self.model_dump_json(indent=2))
        return path
