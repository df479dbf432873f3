"""Dense tensors with reverse-mode automatic differentiation."""

from . import ops
from .autodiff import (
    backward,
    finite_difference_gradient,
    forward,
    per_example_gradients,
    record,
    relative_error,
    value_and_grad,
)
from .params import ParameterSet, uniform_fan_in
from .tensor import Tape, Tensor, no_grad

__all__ = [
    "ops",
    "Tensor",
    "Tape",
    "no_grad",
    "ParameterSet",
    "uniform_fan_in",
    "forward",
    "record",
    "backward",
    "value_and_grad",
    "per_example_gradients",
    "finite_difference_gradient",
    "relative_error",
]
