"""The kernel set the two reference networks need.

Layout is NCHW: (batch, feature maps, electrodes, time). Convolutions are
cross-correlations with stride 1; they loop over kernel offsets and contract
channels with einsum, which keeps memory at the size of the activations.
"""
import logging
from collections import Counter
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from sdda.autodiff.tensor import Function, Tensor
from sdda.exceptions import ShapeError

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-6
BN_MOMENTUM = 0.1
BN_EPS = 1e-5

# process-wide tally of clamp events, taped or not
CLAMP_EVENTS: Counter = Counter()


def clamp_events() -> int:
    return CLAMP_EVENTS["log_clamp"]


def reset_clamp_events() -> None:
    CLAMP_EVENTS.clear()


def _pad_amounts(k: int, padding: str) -> tuple[int, int]:
    if padding == "valid":
        return 0, 0
    if padding == "same":
        total = k - 1
        return total // 2, total - total // 2
    raise ShapeError(f"unknown padding {padding!r}; expected 'valid' or 'same'")


def conv_output_length(n: int, k: int, padding: str) -> int:
    lo, hi = _pad_amounts(k, padding)
    return n + lo + hi - k + 1


def pool_output_length(n: int, k: int, stride: int) -> int:
    return (n - k) // stride + 1


def _require_ndim(kind: str, arr: np.ndarray, ndim: int, role: str = "input") -> None:
    if arr.ndim != ndim:
        raise ShapeError(f"{kind}: {role} must be {ndim}-D, got shape {arr.shape}")


class Conv2d(Function):
    """Grouped 2-D cross-correlation. ``groups == in_channels`` is depthwise."""

    kind = "conv2d"

    def forward(self, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray] = None, *,
                padding: str = "valid", groups: int = 1) -> np.ndarray:
        _require_ndim(self.kind, x, 4)
        _require_ndim(self.kind, w, 4, "weight")
        n, cin, h, wd = x.shape
        cout, cg, kh, kw = w.shape
        if cin % groups or cout % groups:
            raise ShapeError(f"{self.kind}: channels in={cin} out={cout} not divisible by groups={groups}")
        if cg != cin // groups:
            raise ShapeError(f"{self.kind}: weight expects {cg * groups} input channels, input has {cin} (dimension 1)")
        if b is not None and b.shape != (cout,):
            raise ShapeError(f"{self.kind}: bias shape {b.shape} does not match {cout} output channels")
        ph, pw = _pad_amounts(kh, padding), _pad_amounts(kw, padding)
        ho, wo = h + sum(ph) - kh + 1, wd + sum(pw) - kw + 1
        if ho <= 0:
            raise ShapeError(f"{self.kind}: kernel height {kh} exceeds input height {h} (dimension 2)")
        if wo <= 0:
            raise ShapeError(f"{self.kind}: kernel width {kw} exceeds input width {wd} (dimension 3)")
        xp = np.pad(x, ((0, 0), (0, 0), ph, pw)) if padding == "same" else x
        og = cout // groups
        xg = xp.reshape(n, groups, cg, xp.shape[2], xp.shape[3])
        wg = w.reshape(groups, og, cg, kh, kw)
        out = np.zeros((n, groups, og, ho, wo), dtype=np.result_type(x, w))
        for i in range(kh):
            for j in range(kw):
                out += np.einsum("ngchw,goc->ngohw", xg[:, :, :, i:i + ho, j:j + wo], wg[:, :, :, i, j], optimize=True)
        out = out.reshape(n, cout, ho, wo)
        if b is not None:
            out = out + b[None, :, None, None]
        self.xg, self.wg, self.has_bias = xg, wg, b is not None
        self.geometry = (n, cin, h, wd, ph, pw, groups, kh, kw, ho, wo)
        return out

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        n, cin, h, wd, ph, pw, groups, kh, kw, ho, wo = self.geometry
        xg, wg = self.xg, self.wg
        og, cg = wg.shape[1], wg.shape[2]
        gy = grad.reshape(n, groups, og, ho, wo)
        dxg = np.zeros_like(xg, dtype=np.result_type(xg, grad))
        dwg = np.zeros_like(wg, dtype=np.result_type(wg, grad))
        for i in range(kh):
            for j in range(kw):
                window = xg[:, :, :, i:i + ho, j:j + wo]
                dwg[:, :, :, i, j] = np.einsum("ngchw,ngohw->goc", window, gy, optimize=True)
                dxg[:, :, :, i:i + ho, j:j + wo] += np.einsum("ngohw,goc->ngchw", gy, wg[:, :, :, i, j], optimize=True)
        dxp = dxg.reshape(n, cin, dxg.shape[3], dxg.shape[4])
        dx = dxp[:, :, ph[0]:ph[0] + h, pw[0]:pw[0] + wd]
        dw = dwg.reshape(groups * og, cg, kh, kw)
        db = grad.sum(axis=(0, 2, 3)) if self.has_bias else None
        return (dx, dw, db) if self.has_bias else (dx, dw)


class DepthwiseConv2d(Conv2d):
    """Depthwise cross-correlation with depth multiplier ``out_channels / in_channels``."""

    kind = "depthwise_conv2d"

    def forward(self, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray] = None, *,
                padding: str = "valid", groups: Optional[int] = None) -> np.ndarray:
        _require_ndim(self.kind, x, 4)
        return super().forward(x, w, b, padding=padding, groups=x.shape[1])


class BatchNorm2d(Function):
    """Per-feature-map batch normalization.

    ``running_mean`` and ``running_var`` are the store's buffers; train mode
    updates them in place with momentum 0.1 (unbiased variance).
    """

    kind = "batch_norm"

    def forward(self, x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, *,
                running_mean: np.ndarray, running_var: np.ndarray, train: bool = True,
                momentum: float = BN_MOMENTUM, eps: float = BN_EPS) -> np.ndarray:
        _require_ndim(self.kind, x, 4)
        c = x.shape[1]
        if gamma.shape != (c,) or beta.shape != (c,):
            raise ShapeError(f"{self.kind}: affine parameters shaped {gamma.shape}/{beta.shape}, expected ({c},)")
        axes = (0, 2, 3)
        if train:
            count = x.shape[0] * x.shape[2] * x.shape[3]
            if count < 2:
                raise ShapeError(f"{self.kind}: train mode needs more than one value per feature map")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            running_mean *= 1.0 - momentum
            running_mean += momentum * mean
            running_var *= 1.0 - momentum
            running_var += momentum * var * count / (count - 1)
        else:
            mean, var = running_mean.copy(), running_var.copy()
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self.xhat, self.inv_std, self.gamma, self.train = xhat, inv_std, gamma, train
        return gamma[None, :, None, None] * xhat + beta[None, :, None, None]

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        axes = (0, 2, 3)
        xhat, inv_std = self.xhat, self.inv_std
        dgamma = (grad * xhat).sum(axis=axes)
        dbeta = grad.sum(axis=axes)
        dxhat = grad * self.gamma[None, :, None, None]
        if not self.train:
            return dxhat * inv_std[None, :, None, None], dgamma, dbeta
        count = grad.shape[0] * grad.shape[2] * grad.shape[3]
        mean_dxhat = dxhat.sum(axis=axes, keepdims=True) / count
        mean_dxhat_xhat = (dxhat * xhat).sum(axis=axes, keepdims=True) / count
        dx = (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * inv_std[None, :, None, None]
        return dx, dgamma, dbeta


class Square(Function):
    kind = "square"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return x * x

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (2.0 * self.x * grad,)


class Log(Function):
    """Natural log with inputs clamped at ``floor``.

    Clamp events go to ``CLAMP_EVENTS`` on every call and also to the active tape, if any.
    """

    kind = "log"

    def forward(self, x: np.ndarray, *, floor: float = LOG_FLOOR) -> np.ndarray:
        clamped = x <= floor
        n_clamped = int(clamped.sum())
        if n_clamped:
            logger.debug(f"log: clamped {n_clamped} of {x.size} inputs at {floor}")
            CLAMP_EVENTS["log_clamp"] += n_clamped
            if self.tape is not None:
                self.tape.counters["log_clamp"] += n_clamped
        self.safe = np.where(clamped, floor, x)
        self.clamped = clamped
        return np.log(self.safe)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (np.where(self.clamped, 0.0, grad / self.safe),)


class Elu(Function):
    kind = "elu"

    def forward(self, x: np.ndarray, *, alpha: float = 1.0) -> np.ndarray:
        negative = x <= 0
        out = np.where(negative, alpha * np.expm1(np.minimum(x, 0.0)), x)
        self.negative, self.out, self.alpha = negative, out, alpha
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (np.where(self.negative, grad * (self.out + self.alpha), grad),)


class AvgPool2d(Function):
    kind = "avg_pool"

    def forward(self, x: np.ndarray, *, kernel: tuple[int, int], stride: Optional[tuple[int, int]] = None) -> np.ndarray:
        _require_ndim(self.kind, x, 4)
        kh, kw = kernel
        sh, sw = stride or kernel
        h, w = x.shape[2], x.shape[3]
        if kh > h:
            raise ShapeError(f"{self.kind}: kernel height {kh} exceeds input height {h} (dimension 2)")
        if kw > w:
            raise ShapeError(f"{self.kind}: kernel width {kw} exceeds input width {w} (dimension 3)")
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
        self.geometry = (x.shape, kh, kw, sh, sw, windows.shape[2], windows.shape[3])
        return windows.mean(axis=(-2, -1))

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        shape, kh, kw, sh, sw, ho, wo = self.geometry
        dx = np.zeros(shape, dtype=grad.dtype)
        share = grad / (kh * kw)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw] += share
        return (dx,)


class Dropout(Function):
    """Inverted dropout; a no-op when ``train`` is false or ``p == 0``."""

    kind = "dropout"

    def forward(self, x: np.ndarray, *, p: float, rng: Optional[np.random.Generator] = None,
                train: bool = True) -> np.ndarray:
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        if not train or p == 0.0:
            self.mask = None
            return x
        if rng is None:
            raise ValueError("dropout in train mode needs a random generator")
        keep = rng.random(x.shape) >= p
        self.mask = keep.astype(x.dtype) / (1.0 - p)
        return x * self.mask

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad if self.mask is None else grad * self.mask,)


class Linear(Function):
    """Affine map ``x @ w.T + b`` with ``w`` shaped (out, in)."""

    kind = "linear"

    def forward(self, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
        _require_ndim(self.kind, x, 2)
        if w.ndim != 2 or w.shape[1] != x.shape[1]:
            raise ShapeError(f"{self.kind}: weight {w.shape} cannot take inputs of width {x.shape[1]} (dimension 1)")
        self.x, self.w, self.has_bias = x, w, b is not None
        out = x @ w.T
        return out + b if b is not None else out

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        dx = grad @ self.w
        dw = grad.T @ self.x
        if self.has_bias:
            return dx, dw, grad.sum(axis=0)
        return dx, dw


class LogSoftmax(Function):
    kind = "log_softmax"

    def forward(self, x: np.ndarray, *, axis: int = 1) -> np.ndarray:
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.out, self.axis = out, axis
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        softmax = np.exp(self.out)
        return (grad - softmax * grad.sum(axis=self.axis, keepdims=True),)


class Reshape(Function):
    kind = "reshape"

    def forward(self, x: np.ndarray, *, shape: tuple[int, ...]) -> np.ndarray:
        self.original = x.shape
        try:
            return x.reshape(shape)
        except ValueError as e:
            raise ShapeError(f"{self.kind}: cannot view {x.shape} as {shape}") from e

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(self.original),)


class ProjectSum(Function):
    """Scalar ``sum(x * weights)``; ``weights`` defaults to ones."""

    kind = "project_sum"

    def forward(self, x: np.ndarray, *, weights: Optional[np.ndarray] = None) -> np.ndarray:
        if weights is not None and weights.shape != x.shape:
            raise ShapeError(f"{self.kind}: weights {weights.shape} do not match input {x.shape}")
        self.shape, self.weights = x.shape, weights
        return np.asarray((x * weights).sum() if weights is not None else x.sum())

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        if self.weights is None:
            return (np.broadcast_to(grad, self.shape).copy(),)
        return (grad * self.weights,)


class WeightedSum(Function):
    """Scalar ``sum_i weights[i] * x_i`` over scalar inputs."""

    kind = "weighted_sum"

    def forward(self, *scalars: np.ndarray, weights: tuple[float, ...]) -> np.ndarray:
        if len(scalars) != len(weights):
            raise ShapeError(f"{self.kind}: {len(scalars)} inputs but {len(weights)} weights")
        self.weights = weights
        total = scalars[0] * weights[0]
        for value, weight in zip(scalars[1:], weights[1:]):
            total = total + weight * value
        return np.asarray(total)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(grad * weight for weight in self.weights)


# Functional entry points


def conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None, *, padding: str = "valid", groups: int = 1) -> Tensor:
    inputs = (x, w) if b is None else (x, w, b)
    return Conv2d.apply(*inputs, padding=padding, groups=groups)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None, *, padding: str = "valid") -> Tensor:
    inputs = (x, w) if b is None else (x, w, b)
    return DepthwiseConv2d.apply(*inputs, padding=padding)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, *, running_mean: np.ndarray,
               running_var: np.ndarray, train: bool) -> Tensor:
    return BatchNorm2d.apply(x, gamma, beta, running_mean=running_mean, running_var=running_var, train=train)


def square(x: Tensor) -> Tensor:
    return Square.apply(x)


def log(x: Tensor, floor: float = LOG_FLOOR) -> Tensor:
    return Log.apply(x, floor=floor)


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    return Elu.apply(x, alpha=alpha)


def avg_pool(x: Tensor, kernel: tuple[int, int], stride: Optional[tuple[int, int]] = None) -> Tensor:
    return AvgPool2d.apply(x, kernel=kernel, stride=stride)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], train: bool = True) -> Tensor:
    return Dropout.apply(x, p=p, rng=rng, train=train)


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    return Linear.apply(x, w) if b is None else Linear.apply(x, w, b)


def log_softmax(x: Tensor, axis: int = 1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], int(np.prod(x.shape[1:]))))


def project_sum(x: Tensor, weights: Optional[np.ndarray] = None) -> Tensor:
    return ProjectSum.apply(x, weights=weights)


def weighted_sum(scalars: list[Tensor], weights: list[float]) -> Tensor:
    return WeightedSum.apply(*scalars, weights=tuple(float(w) for w in weights))


def kernel_names() -> list[str]:
    return sorted(Function.registry)


__all__ = [
    "conv2d", "depthwise_conv2d", "batch_norm", "square", "log", "elu", "avg_pool", "dropout",
    "linear", "log_softmax", "reshape", "flatten", "project_sum", "weighted_sum",
    "conv_output_length", "pool_output_length", "kernel_names", "LOG_FLOOR",
]
