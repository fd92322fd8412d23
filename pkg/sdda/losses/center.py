"""Class centers and the center losses that pull embeddings toward them.

The cosine loss compares directions only, so the bank is kept on the unit
sphere and updated from l2-normalized embeddings. The euclidean variant is
kept for comparison experiments.
"""
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from sdda.autodiff.gradcheck import GradCase, register_case
from sdda.autodiff.tensor import Function, Tensor
from sdda.exceptions import ShapeError
from sdda.losses.softmax import check_labels

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12

Metric = Literal["cosine", "euclidean"]


def _unit_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.maximum(np.linalg.norm(x, axis=1, keepdims=True), NORM_EPS)
    return x / norms, norms


@dataclass
class CenterBank:
    """Per-class embedding centroids, moved only by ``update_centers``."""

    centers: np.ndarray
    rate: float = 0.5
    metric: Metric = "cosine"
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False)
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        self.centers = np.array(self.centers, dtype=float)
        if self.counts is None:
            self.counts = np.zeros(self.centers.shape[0], dtype=np.int64)

    @classmethod
    def initialize(cls, n_classes: int, width: int, rng: np.random.Generator, rate: float = 0.5,
                   metric: Metric = "cosine") -> "CenterBank":
        """Random unit-norm directions."""
        centers, _ = _unit_rows(rng.standard_normal((n_classes, width)))
        return cls(centers=centers, rate=rate, metric=metric, rng=rng)

    @property
    def n_classes(self) -> int:
        return self.centers.shape[0]

    @property
    def width(self) -> int:
        return self.centers.shape[1]

    def reinitialize_zero_rows(self) -> int:
        zero = np.linalg.norm(self.centers, axis=1) == 0.0
        n_zero = int(zero.sum())
        if n_zero:
            fresh, _ = _unit_rows(self.rng.standard_normal((n_zero, self.width)))
            self.centers[zero] = fresh
            logger.warning(f"⚠️ re-initialized {n_zero} zero-norm class center(s)")
        return n_zero

    def snapshot(self) -> dict[str, np.ndarray]:
        return {"centers": self.centers.copy(), "counts": self.counts.copy()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        self.centers[...] = snapshot["centers"]
        self.counts[...] = snapshot["counts"]


class CosineCenterLoss(Function):
    """1 - mean_i cos(h_i, c_{y_i}); gradients reach the embeddings only."""

    kind = "cosine_center"

    def forward(self, h: np.ndarray, *, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
        if h.ndim != 2 or centers.ndim != 2 or h.shape[1] != centers.shape[1]:
            raise ShapeError(f"{self.kind}: embeddings {h.shape} do not match centers {centers.shape}")
        labels = check_labels(labels, h.shape[0], centers.shape[0])
        h_unit, norms = _unit_rows(h)
        c_unit, _ = _unit_rows(centers)
        target = c_unit[labels]
        cos = np.clip((h_unit * target).sum(axis=1), -1.0, 1.0)
        self.h_unit, self.norms, self.target, self.cos = h_unit, norms, target, cos
        return np.asarray(1.0 - cos.mean())

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        b = self.h_unit.shape[0]
        dcos = (self.target - self.cos[:, None] * self.h_unit) / self.norms
        return (-grad * dcos / b,)


class EuclideanCenterLoss(Function):
    """(1/2b) sum_i ||h_i - c_{y_i}||^2."""

    kind = "euclidean_center"

    def forward(self, h: np.ndarray, *, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
        if h.ndim != 2 or centers.ndim != 2 or h.shape[1] != centers.shape[1]:
            raise ShapeError(f"{self.kind}: embeddings {h.shape} do not match centers {centers.shape}")
        labels = check_labels(labels, h.shape[0], centers.shape[0])
        self.diff = h - centers[labels]
        return np.asarray(0.5 * (self.diff ** 2).sum() / h.shape[0])

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.diff / self.diff.shape[0],)


def cosine_center_loss(embeddings: Tensor, labels: np.ndarray, bank: CenterBank) -> Tensor:
    return CosineCenterLoss.apply(embeddings, centers=bank.centers.copy(), labels=np.asarray(labels))


def center_loss(embeddings: Tensor, labels: np.ndarray, bank: CenterBank) -> Tensor:
    """Center loss under the bank's metric."""
    if bank.metric == "euclidean":
        return EuclideanCenterLoss.apply(embeddings, centers=bank.centers.copy(), labels=np.asarray(labels))
    return cosine_center_loss(embeddings, labels, bank)


def update_centers(bank: CenterBank, embeddings: np.ndarray, labels: np.ndarray) -> CenterBank:
    """c_j -= rate * sum_{i: y_i=j} (c_j - h_i) / (1 + n_j), for classes in the batch.

    Cosine banks use l2-normalized embeddings.
    """
    h = np.asarray(embeddings, dtype=float)
    if h.ndim != 2 or h.shape[1] != bank.width:
        raise ShapeError(f"embeddings {h.shape} do not match a bank of width {bank.width}")
    labels = check_labels(labels, h.shape[0], bank.n_classes)
    if bank.metric == "cosine":
        h, _ = _unit_rows(h)
    for j in np.unique(labels):
        members = h[labels == j]
        delta = (bank.centers[j] - members).sum(axis=0) / (1 + len(members))
        bank.centers[j] -= bank.rate * delta
        bank.counts[j] += 1
    bank.reinitialize_zero_rows()
    return bank


def _center_case(shape: tuple[int, ...], rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b, width = shape[0], int(np.prod(shape[1:]))
    n_classes = 3
    return rng.standard_normal((b, width)), rng.standard_normal((n_classes, width)), rng.integers(0, n_classes, b)


@register_case("cosine_center")
def _cosine_case(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    h, centers, labels = _center_case(shape, rng)
    return GradCase([h], attrs=lambda: {"centers": centers, "labels": labels})


@register_case("euclidean_center")
def _euclidean_case(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    h, centers, labels = _center_case(shape, rng)
    return GradCase([h], attrs=lambda: {"centers": centers, "labels": labels})
