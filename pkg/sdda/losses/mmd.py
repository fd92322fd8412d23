"""Maximum mean discrepancy between source and target embeddings.

Biased (V-statistic) estimate under a Gaussian kernel averaged over a set of
bandwidths. Bandwidths are chosen from the data without gradient: the median
pairwise squared distance of the joint batch scaled by fixed factors, or one
fixed sigma^2.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from sdda.autodiff.gradcheck import GradCase, register_case
from sdda.autodiff.tensor import Function, Tensor
from sdda.exceptions import ShapeError

logger = logging.getLogger(__name__)

KERNEL_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)


def pairwise_sq_dists(z: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("abl,abl->ab", diff, diff)


def median_bandwidths(z: np.ndarray, factors: Sequence[float] = KERNEL_FACTORS) -> tuple[float, ...]:
    """sigma^2 values: median off-diagonal squared distance times each factor (1.0 if the median is 0)."""
    d = pairwise_sq_dists(z)
    upper = d[np.triu_indices(len(z), k=1)]
    median = float(np.median(upper)) if upper.size else 0.0
    if median <= 0.0:
        median = 1.0
    return tuple(median * f for f in factors)


def _weights(n_s: int, n_t: int) -> np.ndarray:
    w = np.empty((n_s + n_t, n_s + n_t))
    w[:n_s, :n_s] = 1.0 / (n_s * n_s)
    w[n_s:, n_s:] = 1.0 / (n_t * n_t)
    w[:n_s, n_s:] = -1.0 / (n_s * n_t)
    w[n_s:, :n_s] = -1.0 / (n_s * n_t)
    return w


def gaussian_kernel(d: np.ndarray, sigma2: Sequence[float]) -> np.ndarray:
    return np.mean([np.exp(-d / (2.0 * s)) for s in sigma2], axis=0)


def mmd2(hs: np.ndarray, ht: np.ndarray, sigma2: Sequence[float]) -> float:
    """Plain-array estimate: mean k(s,s) + mean k(t,t) - 2 mean k(s,t)."""
    z = np.concatenate([hs, ht])
    k = gaussian_kernel(pairwise_sq_dists(z), sigma2)
    n_s = len(hs)
    return float(k[:n_s, :n_s].mean() + k[n_s:, n_s:].mean() - 2.0 * k[:n_s, n_s:].mean())


class MMDLoss(Function):
    kind = "mmd"

    def forward(self, hs: np.ndarray, ht: np.ndarray, *, sigma2: tuple[float, ...]) -> np.ndarray:
        if hs.ndim != 2 or ht.ndim != 2 or hs.shape[1] != ht.shape[1]:
            raise ShapeError(f"{self.kind}: domain embeddings {hs.shape} and {ht.shape} are incompatible")
        if len(hs) == 0 or len(ht) == 0:
            raise ShapeError(f"{self.kind}: both domains need at least one embedding")
        if not sigma2 or min(sigma2) <= 0.0:
            raise ValueError(f"{self.kind}: bandwidths must be positive, got {sigma2}")
        z = np.concatenate([hs, ht])
        d = pairwise_sq_dists(z)
        per_bandwidth = [np.exp(-d / (2.0 * s)) for s in sigma2]
        k = np.mean(per_bandwidth, axis=0)
        w = _weights(len(hs), len(ht))
        # dk/dd
        k_prime = np.mean([-e / (2.0 * s) for e, s in zip(per_bandwidth, sigma2)], axis=0)
        n_s = len(hs)
        self.z, self.m, self.n_s = z, w * k_prime, n_s
        return np.asarray(k[:n_s, :n_s].mean() + k[n_s:, n_s:].mean() - 2.0 * k[:n_s, n_s:].mean())

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m, z = self.m, self.z
        dz = 4.0 * (m.sum(axis=1)[:, None] * z - m @ z)
        dz = grad * dz
        return dz[:self.n_s], dz[self.n_s:]


def mmd_loss(hs: Tensor, ht: Tensor, bandwidth: Optional[float] = None,
             factors: Sequence[float] = KERNEL_FACTORS) -> Tensor:
    """MMD^2 with a fixed sigma^2 (``bandwidth``) or the median-heuristic family."""
    if hs.shape[0] == 0 or ht.shape[0] == 0:
        raise ShapeError("mmd: both domains need at least one embedding")
    if bandwidth is not None:
        sigma2 = (float(bandwidth),)
    else:
        sigma2 = median_bandwidths(np.concatenate([hs.data, ht.data]), factors)
    return MMDLoss.apply(hs, ht, sigma2=sigma2)


@register_case("mmd")
def _mmd_case(shape: tuple[int, ...], rng: np.random.Generator) -> GradCase:
    b, width = shape[0], int(np.prod(shape[1:]))
    hs = rng.standard_normal((b, width))
    ht = rng.standard_normal((b, width)) + 0.5
    sigma2 = median_bandwidths(np.concatenate([hs, ht]))
    return GradCase([hs, ht], attrs=lambda: {"sigma2": sigma2})
