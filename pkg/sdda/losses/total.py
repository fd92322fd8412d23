"""The combined objective L = L_s + lambda1 * L_c + lambda2 * L_d."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sdda.autodiff import kernels as K
from sdda.autodiff.tensor import Tensor
from sdda.exceptions import NonFiniteError


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError(f"trade-off weights must be non-negative, got ({self.lambda1}, {self.lambda2})")


def total_loss(softmax: Tensor, center: Optional[Tensor], mmd: Optional[Tensor], weights: LossWeights) -> Tensor:
    """Exact weighted sum; terms that were not computed are left out."""
    terms, coefficients = [softmax], [1.0]
    for value, weight in ((center, weights.lambda1), (mmd, weights.lambda2)):
        if value is not None:
            terms.append(value)
            coefficients.append(weight)
    for name, value in zip(("softmax", "center", "mmd"), (softmax, center, mmd)):
        if value is not None and not np.all(np.isfinite(value.data)):
            raise NonFiniteError(f"{name} loss is not finite ({value.item()})", component=name)
    return K.weighted_sum(terms, coefficients)
