"""Per-layer parameter counts, compared against the published architecture tables."""
import logging
from typing import Optional

import pandas as pd
from pydantic import BaseModel

from sdda.models.spec import ModelSpec

logger = logging.getLogger(__name__)

# Published "Num of param" columns, keyed by (architecture, electrodes).
PUBLISHED_COUNTS: dict[tuple[str, int], dict[str, int]] = {
    ("convnet", 22): {"temporal_conv": 1040, "spatial_conv": 35200, "batch_norm": 80, "classifier": 11044,
                      "total": 47364},
    ("convnet", 3): {"temporal_conv": 1040, "spatial_conv": 4800, "batch_norm": 80, "classifier": 4162,
                     "total": 10082},
    ("eegnet", 22): {"temporal_conv": 512, "batch_norm_1": 16, "depthwise_conv": 176, "batch_norm_2": 16,
                     "separable_conv": 272, "batch_norm_3": 32, "fc": 1988, "total": 3012},
    ("eegnet", 3): {"temporal_conv": 512, "batch_norm_1": 16, "depthwise_conv": 24, "separable_conv": 128,
                    "batch_norm_3": 32, "fc": 738, "total": 1610},
}


class LayerCount(BaseModel):
    name: str
    label: str
    count: int
    published: Optional[int] = None

    @property
    def delta(self) -> Optional[int]:
        return None if self.published is None else self.count - self.published

    @property
    def matches(self) -> Optional[bool]:
        return None if self.published is None else self.count == self.published


class ParamReport(BaseModel):
    """Computed counts with match flags against the published values, where known."""

    model: str
    n_channels: int
    layers: list[LayerCount]
    total: int
    published_total: Optional[int] = None

    @property
    def total_delta(self) -> Optional[int]:
        return None if self.published_total is None else self.total - self.published_total

    def count(self, name: str) -> int:
        for row in self.layers:
            if row.name == name:
                return row.count
        raise KeyError(name)

    def mismatches(self) -> list[LayerCount]:
        return [row for row in self.layers if row.matches is False]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"layer": row.name, "label": row.label, "params": row.count, "published": row.published,
             "delta": row.delta, "match": row.matches}
            for row in self.layers
        ]
        rows.append({"layer": "total", "label": "Total", "params": self.total, "published": self.published_total,
                     "delta": self.total_delta,
                     "match": None if self.published_total is None else self.total == self.published_total})
        return pd.DataFrame(rows)


def count_params(spec: ModelSpec) -> ParamReport:
    """Count trainable parameters of every parameterized layer."""
    published = PUBLISHED_COUNTS.get((spec.name, spec.n_channels), {})
    rows = [
        LayerCount(name=layer.name, label=layer.label or layer.kind, count=layer.param_count(),
                   published=published.get(layer.name))
        for layer in spec.layers
        if layer.param_count() > 0
    ]
    return ParamReport(
        model=spec.name,
        n_channels=spec.n_channels,
        layers=rows,
        total=sum(row.count for row in rows),
        published_total=published.get("total"),
    )
