"""Trainable parameters shared by both Siamese branches."""
import logging
from typing import Iterator, Literal

import numpy as np

from sdda.autodiff.tensor import Tensor
from sdda.exceptions import ShapeError

logger = logging.getLogger(__name__)

Group = Literal["feature", "classifier"]


class ParamStore:
    """Named parameter arrays with gradient buffers.

    Branches share parameters by holding the same store; ``param(name)``
    issues a fresh leaf tensor over the current values so that ``backward``
    can route gradients back here by name. Non-trainable state (batch-norm
    running statistics) lives in ``buffers``.
    """

    def __init__(self, dtype: np.dtype = np.float64):
        self.dtype = np.dtype(dtype)
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.groups: dict[str, Group] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray, group: Group) -> None:
        if name in self.values:
            raise ValueError(f"parameter {name!r} already registered")
        self.values[name] = np.array(value, dtype=self.dtype)
        self.grads[name] = np.zeros_like(self.values[name])
        self.groups[name] = group

    def add_buffer(self, name: str, value: np.ndarray) -> None:
        self.buffers[name] = np.array(value, dtype=self.dtype)

    def param(self, name: str) -> Tensor:
        return Tensor(self.values[name], requires_grad=True, name=name, owner=self)

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if grad.shape != self.values[name].shape:
            raise ShapeError(f"gradient for {name} shaped {grad.shape}, parameter is {self.values[name].shape}")
        self.grads[name] += grad

    def zero_grad(self) -> None:
        for grad in self.grads.values():
            grad.fill(0.0)

    def names(self, group: Group | None = None) -> list[str]:
        return [n for n in self.values if group is None or self.groups[n] == group]

    def count(self, group: Group | None = None) -> int:
        return int(sum(self.values[n].size for n in self.names(group)))

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __len__(self) -> int:
        return len(self.values)

    def snapshot(self) -> dict[str, dict[str, np.ndarray]]:
        return {
            "values": {k: v.copy() for k, v in self.values.items()},
            "buffers": {k: v.copy() for k, v in self.buffers.items()},
        }

    def restore(self, snapshot: dict[str, dict[str, np.ndarray]]) -> None:
        """Copy a snapshot back in place, keeping array identity."""
        for name, value in snapshot["values"].items():
            self.values[name][...] = value
        for name, value in snapshot["buffers"].items():
            self.buffers[name][...] = value
        self.zero_grad()
