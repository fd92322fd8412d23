"""Tensors, the recording tape and the reverse sweep.

A ``Tensor`` is an immutable numpy array plus bookkeeping. Operations are
``Function`` subclasses; each registers itself under its ``kind`` so callers can
dispatch by name through ``forward_op``. While a ``Tape`` is active (``with
Tape() as tape:``) every operation appends a node holding its inputs, its
output and whatever the backward pass needs. ``backward`` walks the nodes in
reverse and accumulates gradients, writing parameter gradients straight into
the owning ``ParamStore``.
"""
import contextvars
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Any, ClassVar, Iterator, Optional, Sequence

import numpy as np

from sdda.exceptions import NonFiniteError, ShapeError, TapeError

logger = logging.getLogger(__name__)

_active_tape: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar("sdda_tape", default=None)


class Tensor:
    """Dense row-major array. The wrapped data is read-only."""

    __slots__ = ("data", "requires_grad", "name", "owner")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None, owner: Any = None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        view = arr.view()
        view.flags.writeable = False
        self.data = view
        self.requires_grad = requires_grad
        self.name = name
        self.owner = owner

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return np.array(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


class Function:
    """One differentiable kernel.

    Subclasses set ``kind``, implement ``forward(*arrays, **attrs)`` returning an
    ndarray and ``backward(grad)`` returning one gradient (or None) per input.
    State the backward pass needs is stored on ``self`` during ``forward``.
    """

    kind: ClassVar[str] = ""
    registry: ClassVar[dict[str, type["Function"]]] = {}

    def __init_subclass__(cls, **kwargs: Any):
        super().__init_subclass__(**kwargs)
        if cls.kind:
            Function.registry[cls.kind] = cls

    def __init__(self, tape: Optional["Tape"] = None):
        self.tape = tape

    def forward(self, *arrays: np.ndarray, **attrs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *inputs: Tensor, **attrs: Any) -> Tensor:
        tape = _active_tape.get()
        fn = cls(tape)
        out = fn.forward(*(t.data for t in inputs), **attrs)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{cls.kind} produced non-finite values from finite inputs")
        requires_grad = any(t.requires_grad for t in inputs)
        result = Tensor(out, requires_grad=requires_grad)
        if tape is not None and requires_grad:
            tape.record(fn, inputs, result)
        return result


@dataclass
class Node:
    op: Function
    inputs: tuple[Tensor, ...]
    output: Tensor


class Tape:
    """Ordered record of the operations of one forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.counters: Counter = Counter()
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info: Any) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def record(self, op: Function, inputs: Sequence[Tensor], output: Tensor) -> None:
        self.nodes.append(Node(op, tuple(inputs), output))

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)


def current_tape() -> Optional[Tape]:
    return _active_tape.get()


class Gradients:
    """Gradient lookup keyed by tensor identity."""

    def __init__(self, grads: dict[int, np.ndarray], tensors: dict[int, Tensor]):
        self._grads = grads
        self._tensors = tensors

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        if id(tensor) not in self._grads:
            return np.zeros_like(tensor.data)
        return self._grads[id(tensor)]

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse sweep from a scalar ``loss`` recorded on ``tape``.

    Parameter leaves issued by a ``ParamStore`` get their gradient added to
    that store's buffers; the returned ``Gradients`` also covers plain inputs.
    """
    if loss.data.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not any(node.output is loss for node in tape.nodes):
        raise TapeError("loss was not recorded on this tape; run the forward pass inside the tape first")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    tensors: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(tape.nodes):
        upstream = grads.get(id(node.output))
        if upstream is None:
            continue
        input_grads = node.op.backward(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise TapeError(f"{node.op.kind} returned gradient of shape {grad.shape} for input {tensor.shape}")
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
                tensors[key] = tensor

    for key, tensor in tensors.items():
        if tensor.owner is not None and tensor.name is not None:
            tensor.owner.accumulate(tensor.name, grads[key])
    return Gradients(grads, tensors)


def forward_op(kind: str, inputs: Sequence[Tensor], **attrs: Any) -> Tensor:
    """Dispatch a kernel by name."""
    try:
        cls = Function.registry[kind]
    except KeyError:
        raise KeyError(f"unknown kernel {kind!r}; known: {sorted(Function.registry)}") from None
    return cls.apply(*inputs, **attrs)
