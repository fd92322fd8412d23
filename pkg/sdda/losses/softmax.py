"""Softmax cross-entropy over class logits."""
import numpy as np

from sdda.autodiff.gradcheck import GradCase, register_case
from sdda.autodiff.tensor import Function, Tensor
from sdda.exceptions import LabelError, ShapeError


def check_labels(labels: np.ndarray, n_rows: int, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n_rows,):
        raise ShapeError(f"{n_rows} rows but labels shaped {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise LabelError(f"labels must be integers, got dtype {labels.dtype}")
    bad = (labels < 0) | (labels >= n_classes)
    if bad.any():
        raise LabelError(f"label {int(labels[bad][0])} outside [0, {n_classes})")
    return labels


class SoftmaxCrossEntropy(Function):
    """Mean over the batch of -log softmax(z_i)[y_i], max-shifted."""

    kind = "softmax_cross_entropy"

    def forward(self, logits: np.ndarray, *, labels: np.ndarray) -> np.ndarray:
        if logits.ndim != 2:
            raise ShapeError(f"{self.kind}: logits must be (b, C), got {logits.shape}")
        b, c = logits.shape
        labels = check_labels(labels, b, c)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        self.probs = np.exp(log_probs)
        self.labels = labels
        return np.asarray(-log_probs[np.arange(b), labels].mean())

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        b = self.probs.shape[0]
        dz = self.probs.copy()
        dz[np.arange(b), self.labels] -= 1.0
        return (grad * dz / b,)


def softmax_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    return SoftmaxCrossEntropy.apply(logits, labels=np.asarray(labels))


@register_case("softmax_cross_entropy")
def _softmax_case(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    b, c = shape[0], max(2, shape[-1])
    labels = rng.integers(0, c, size=b)
    return GradCase([rng.standard_normal((b, c)) * 2.0], attrs=lambda: {"labels": labels})
