"""Central finite-difference checks for every registered kernel.

A case builds random 64-bit inputs for a kernel from a shape and a seed. The
check contracts the kernel output with a fixed random projection so every
output element matters, then compares the tape's gradients with central
differences at ``h = 1e-5``.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from sdda.autodiff import kernels as K
from sdda.autodiff.tensor import Tape, Tensor, backward, forward_op

logger = logging.getLogger(__name__)

STEP = 1e-5


@dataclass
class GradCase:
    """Inputs for one check. ``attrs`` is rebuilt per evaluation so stateful
    attributes (batch-norm buffers, dropout generators) start identical."""

    arrays: list[np.ndarray]
    attrs: Callable[[], dict[str, Any]] = field(default=lambda: {})
    differentiable: Optional[Sequence[int]] = None
    kind: Optional[str] = None


CaseFactory = Callable[[tuple[int, ...], np.random.Generator], GradCase]
CASES: dict[str, CaseFactory] = {}


def register_case(kind: str) -> Callable[[CaseFactory], CaseFactory]:
    def wrap(factory: CaseFactory) -> CaseFactory:
        CASES[kind] = factory
        return factory
    return wrap


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # elementwise, with a floor tied to the gradient's scale so entries that are
    # zero up to roundoff do not dominate
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    floor = max(1e-3 * scale, 1e-12)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max(initial=0.0))


def grad_check(op_kind: str, shape: Sequence[int], seed: int) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if op_kind not in CASES:
        raise KeyError(f"no gradient case for {op_kind!r}; known: {sorted(CASES)}")
    rng = np.random.default_rng(seed)
    case = CASES[op_kind](tuple(int(s) for s in shape), rng)
    kind = case.kind or op_kind
    arrays = [np.array(a, dtype=np.float64) for a in case.arrays]
    wrt = list(case.differentiable if case.differentiable is not None else range(len(arrays)))

    with Tape():
        shaped = forward_op(kind, [Tensor(a) for a in arrays], **case.attrs())
    projection = rng.standard_normal(shaped.shape)

    def objective(values: list[np.ndarray]) -> float:
        out = forward_op(kind, [Tensor(v) for v in values], **case.attrs())
        return float((out.data * projection).sum())

    with Tape() as tape:
        inputs = [Tensor(a, requires_grad=i in wrt) for i, a in enumerate(arrays)]
        out = forward_op(kind, inputs, **case.attrs())
        loss = K.project_sum(out, projection)
    grads = backward(tape, loss)

    worst = 0.0
    for index in wrt:
        analytic = grads[inputs[index]]
        numeric = np.zeros_like(arrays[index])
        for pos in np.ndindex(arrays[index].shape):
            original = arrays[index][pos]
            arrays[index][pos] = original + STEP
            plus = objective(arrays)
            arrays[index][pos] = original - STEP
            minus = objective(arrays)
            arrays[index][pos] = original
            numeric[pos] = (plus - minus) / (2 * STEP)
        worst = max(worst, _relative_error(analytic, numeric))
    logger.debug(f"grad_check {op_kind} shape={tuple(shape)} seed={seed}: {worst:.3e}")
    return worst


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...], margin: float = 0.1) -> np.ndarray:
    values = rng.uniform(margin, 2.0, size=shape)
    return values * rng.choice([-1.0, 1.0], size=shape)


@register_case("conv2d")
def _conv_valid(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    n, c, h, w = shape
    kh, kw = max(1, h // 2), min(3, w)
    return GradCase(
        [rng.standard_normal(shape), rng.standard_normal((2, c, kh, kw)), rng.standard_normal(2)],
        attrs=lambda: {"padding": "valid"},
    )


@register_case("conv2d_same")
def _conv_same(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    n, c, h, w = shape
    return GradCase(
        [rng.standard_normal(shape), rng.standard_normal((3, c, 1, min(4, w)))],
        attrs=lambda: {"padding": "same"},
        kind="conv2d",
    )


@register_case("depthwise_conv2d")
def _depthwise(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    n, c, h, w = shape
    return GradCase(
        [rng.standard_normal(shape), rng.standard_normal((c, 1, h, 1))],
        attrs=lambda: {"padding": "valid"},
    )


@register_case("depthwise_conv2d_same")
def _depthwise_same(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    n, c, h, w = shape
    return GradCase(
        [rng.standard_normal(shape), rng.standard_normal((c, 1, 1, min(3, w)))],
        attrs=lambda: {"padding": "same"},
        kind="depthwise_conv2d",
    )


def _bn_case(shape: tuple[int, ...], rng: np.random.Generator, train: bool) -> GradCase:
    c = shape[1]
    mean0, var0 = rng.standard_normal(c), rng.uniform(0.5, 2.0, c)
    return GradCase(
        [rng.standard_normal(shape) * 2.0 + 0.5, rng.uniform(0.5, 1.5, c), rng.standard_normal(c)],
        attrs=lambda: {"running_mean": mean0.copy(), "running_var": var0.copy(), "train": train},
        kind="batch_norm",
    )


@register_case("batch_norm")
def _bn_train(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    return _bn_case(shape, rng, train=True)


@register_case("batch_norm_eval")
def _bn_eval(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    return _bn_case(shape, rng, train=False)


@register_case("square")
def _square(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    return GradCase([rng.standard_normal(shape)])


@register_case("log")
def _log(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    return GradCase([rng.uniform(0.2, 3.0, size=shape)])


@register_case("elu")
def _elu(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    return GradCase([_away_from_zero(rng, shape)])


@register_case("avg_pool")
def _avg_pool(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    w = shape[3]
    k = max(1, min(4, w // 2))
    stride = max(1, k - 1)
    return GradCase([rng.standard_normal(shape)], attrs=lambda: {"kernel": (1, k), "stride": (1, stride)})


@register_case("dropout")
def _dropout(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    seed = int(rng.integers(2**31))
    return GradCase(
        [rng.standard_normal(shape)],
        attrs=lambda: {"p": 0.5, "rng": np.random.default_rng(seed), "train": True},
    )


@register_case("linear")
def _linear(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    n, d = shape[0], int(np.prod(shape[1:]))
    return GradCase([rng.standard_normal((n, d)), rng.standard_normal((3, d)), rng.standard_normal(3)])


@register_case("log_softmax")
def _log_softmax(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    n, d = shape[0], int(np.prod(shape[1:]))
    return GradCase([rng.standard_normal((n, d)) * 3.0])


@register_case("reshape")
def _reshape(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    return GradCase([rng.standard_normal(shape)], attrs=lambda: {"shape": (shape[0], -1)})


@register_case("weighted_sum")
def _weighted_sum(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    weights = tuple(float(w) for w in rng.uniform(0.0, 3.0, size=3))
    return GradCase([np.asarray(rng.standard_normal()) for _ in range(3)], attrs=lambda: {"weights": weights})
