"""AdamW with decoupled weight decay."""
import logging
from dataclasses import dataclass, field

import numpy as np

from sdda.autodiff.params import ParamStore
from sdda.exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    step: int = 0
    exp_avg: dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(
            step=self.step,
            exp_avg={k: v.copy() for k, v in self.exp_avg.items()},
            exp_avg_sq={k: v.copy() for k, v in self.exp_avg_sq.items()},
        )


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float,
               betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.01) -> dict[str, np.ndarray]:
    """One in-place update of every array in ``params``.

        theta <- theta - lr * weight_decay * theta
        m <- b1 m + (1 - b1) g;   v <- b2 v + (1 - b2) g^2
        theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
    """
    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name, theta in params.items():
        grad = grads[name]
        if name not in state.exp_avg:
            state.exp_avg[name] = np.zeros_like(theta)
            state.exp_avg_sq[name] = np.zeros_like(theta)
        m, v = state.exp_avg[name], state.exp_avg_sq[name]
        if m.shape != theta.shape:
            raise ConfigError(f"moment buffer for {name} shaped {m.shape}, parameter is {theta.shape}")
        if weight_decay:
            theta -= lr * weight_decay * theta
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        theta -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params


class AdamW:
    """Steps a ``ParamStore`` from its accumulated gradients."""

    def __init__(self, store: ParamStore, lr: float, betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.store = store
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay
        self.state = AdamState()
        logger.debug(f"AdamW lr={lr} betas={betas} eps={eps} weight_decay={weight_decay}")

    def step(self) -> None:
        adamw_step(self.store.values, self.store.grads, self.state, self.lr, self.betas, self.eps,
                   self.weight_decay)

    def state_dict(self) -> AdamState:
        return self.state.copy()

    def load_state_dict(self, state: AdamState) -> None:
        self.state = state.copy()
