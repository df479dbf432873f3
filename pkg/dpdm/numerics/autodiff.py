"""Forward evaluation, backward passes and per-example gradients."""

import concurrent.futures
from typing import Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .params import ParameterSet
from .tensor import Tape, Tensor, no_grad
from ..utils.errors import GradientError, ShapeError

# (parameter tensors, input) -> output
ModelFn = Callable[[Mapping[str, Tensor], Tensor], Tensor]
# (parameter tensors, *args) -> scalar loss
LossFn = Callable[..., Tensor]


def forward(model: ModelFn, params: ParameterSet, inputs, *, track: bool = False) -> Tensor:
    """
    Evaluate `model` on a batch.

    A model may declare `input_shape` (per-example, without the batch
    dimension); mismatching inputs are rejected before any arithmetic.
    """
    x = inputs if isinstance(inputs, Tensor) else Tensor(inputs, dtype=params.dtype)
    expected = getattr(model, "input_shape", None)
    if expected is not None and tuple(x.shape[1:]) != tuple(expected):
        raise ShapeError("forward", tuple(expected), tuple(x.shape[1:]))
    if track:
        return model(params.track(), x)
    with no_grad():
        return model(params.constants(), x)


def record(loss_fn: LossFn, params: ParameterSet, *args) -> Tape:
    """Run `loss_fn` with tracked parameters and return its tape."""
    leaves = params.track()
    root = loss_fn(leaves, *args)
    return Tape(root, leaves)


def backward(tape: Tape) -> ParameterSet:
    """Gradient of the tape root for every leaf; unused parameters get exact zeros."""
    leaf_grads = tape.run()
    grads = {}
    for name, leaf in tape.leaves.items():
        grad = leaf_grads.get(leaf.id)
        grads[name] = np.zeros_like(leaf.data) if grad is None else np.asarray(grad, dtype=leaf.dtype)
    return ParameterSet(grads)


def value_and_grad(loss_fn: LossFn, params: ParameterSet, *args) -> Tuple[float, ParameterSet]:
    tape = record(loss_fn, params, *args)
    return tape.root.item(), backward(tape)


def per_example_gradients(
    loss_fn: LossFn,
    params: ParameterSet,
    batch: np.ndarray,
    *aux: np.ndarray,
    max_workers: Optional[int] = None,
) -> List[ParameterSet]:
    """
    One backward pass per example.

    `loss_fn(params, x_i, *aux_i)` receives each example with a leading batch
    dimension of one; `aux` arrays (labels, timesteps) are sliced alongside.
    """
    batch = np.asarray(batch)
    n = batch.shape[0] if batch.ndim else 0
    if n == 0:
        raise GradientError("per-example gradients need a non-empty batch")
    for arr in aux:
        if len(arr) != n:
            raise ShapeError("per_example_gradients", batch.shape, np.shape(arr))

    def one(i: int) -> ParameterSet:
        sliced = [np.asarray(arr)[i : i + 1] for arr in aux]
        _, grad = value_and_grad(loss_fn, params, Tensor(batch[i : i + 1], dtype=params.dtype), *sliced)
        return grad

    if not max_workers or max_workers <= 1 or n == 1:
        return [one(i) for i in range(n)]

    results: List[Optional[ParameterSet]] = [None] * n
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_index = {executor.submit(one, i): i for i in range(n)}
        for future in concurrent.futures.as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
    return results  # type: ignore[return-value]


def finite_difference_gradient(
    loss_fn: LossFn, params: ParameterSet, *args, step: float = 1e-5
) -> ParameterSet:
    """Central differences, coordinate by coordinate. Use with 64-bit parameters."""
    base = params.flatten().astype(np.float64)
    grad = np.zeros_like(base)
    with no_grad():
        for k in range(base.size):
            plus, minus = base.copy(), base.copy()
            plus[k] += step
            minus[k] -= step
            f_plus = loss_fn(params.unflatten(plus).constants(), *args).item()
            f_minus = loss_fn(params.unflatten(minus).constants(), *args).item()
            grad[k] = (f_plus - f_minus) / (2.0 * step)
    return params.unflatten(grad)


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Elementwise |a-b| / max(|a|, |b|, floor)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
