"""Dense tensors with reverse-mode differentiation for the reference networks."""
from sdda.autodiff import kernels
from sdda.autodiff.gradcheck import grad_check, register_case, GradCase
from sdda.autodiff.params import ParamStore
from sdda.autodiff.tensor import Function, Gradients, Tape, Tensor, backward, current_tape, forward_op

__all__ = [
    "Function",
    "GradCase",
    "Gradients",
    "ParamStore",
    "Tape",
    "Tensor",
    "backward",
    "current_tape",
    "forward_op",
    "grad_check",
    "kernels",
    "register_case",
]
