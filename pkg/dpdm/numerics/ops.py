"""Differentiable operations: elementwise algebra, layers and losses.

Every op takes and returns `Tensor`s and registers its backward rule with the
output node. Layers are batch-first: dense inputs are (n, features), image
inputs are (n, H, W, C).
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import Tensor
from ..utils.errors import ShapeError

Operand = Union[Tensor, np.ndarray, float, int]


def _wrap(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype) if dtype is not None else value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape)


# ---------------------------------------------------------------------------
# Elementwise algebra and reductions


def add(a: Operand, b: Operand) -> Tensor:
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return Tensor.from_op(a.data * np.asarray(factor, dtype=a.dtype), (a,), backward, "scale")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape))

    def backward(g):
        return (g.reshape(a.shape),)

    return Tensor.from_op(out, (a,), backward, "reshape")


def flatten(a: Tensor) -> Tensor:
    """Collapse all but the batch dimension."""
    return reshape(a, (a.shape[0], -1))


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors the numpy name
    def backward(g):
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return Tensor.from_op(a.data.sum(dtype=a.dtype), (a,), backward, "sum")


def mean(a: Tensor) -> Tensor:
    return scale(sum(a), 1.0 / a.size)


# ---------------------------------------------------------------------------
# Layers


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map `x @ weight + bias` with weight shaped (in, out)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError("dense", x.shape, weight.shape)
    if bias.shape != (weight.shape[1],):
        raise ShapeError("dense bias", bias.shape, (weight.shape[1],))

    def backward(g):
        return g @ weight.data.T, x.data.T @ g, g.sum(axis=0)

    return Tensor.from_op(x.data @ weight.data + bias.data, (x, weight, bias), backward, "dense")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    Stride-1 convolution with zero 'same' padding.

    Args:
        x: (n, H, W, C_in)
        weight: (kh, kw, C_in, C_out), odd kernel sizes
        bias: (C_out,)
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[3] != weight.shape[2]:
        raise ShapeError("conv2d", x.shape, weight.shape)
    kh, kw, _, c_out = weight.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError("conv2d kernel", weight.shape[:2], (kh | 1, kw | 1))
    if bias.shape != (c_out,):
        raise ShapeError("conv2d bias", bias.shape, (c_out,))

    n, height, width, _ = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    out = np.zeros((n, height, width, c_out), dtype=np.result_type(x.dtype, weight.dtype))
    for i in range(kh):
        for j in range(kw):
            out += padded[:, i : i + height, j : j + width, :] @ weight.data[i, j]
    out += bias.data

    def backward(g):
        grad_padded = np.zeros_like(padded, dtype=g.dtype)
        grad_weight = np.zeros_like(weight.data, dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                window = padded[:, i : i + height, j : j + width, :]
                grad_weight[i, j] = np.tensordot(window, g, axes=([0, 1, 2], [0, 1, 2]))
                grad_padded[:, i : i + height, j : j + width, :] += g @ weight.data[i, j].T
        grad_x = grad_padded[:, ph : ph + height, pw : pw + width, :]
        return grad_x, grad_weight, g.sum(axis=(0, 1, 2))

    return Tensor.from_op(out, (x, weight, bias), backward, "conv2d")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor.from_op(np.where(mask, x.data, 0).astype(x.dtype), (x,), backward, "relu")


def silu(x: Tensor) -> Tensor:
    sig = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        return (g * (sig * (1.0 + x.data * (1.0 - sig))),)

    return Tensor.from_op((x.data * sig).astype(x.dtype), (x,), backward, "silu")


def timestep_embedding(t: Union[Tensor, np.ndarray], dim: int, dtype=None) -> Tensor:
    """
    Sinusoidal embedding of scalar timesteps, shape (n, dim).

    Timesteps are usually integer arrays (no gradient); passing a float
    `Tensor` makes the embedding differentiable in t.
    """
    if dim % 2 != 0 or dim < 2:
        raise ShapeError("timestep_embedding", (dim,), (dim + dim % 2,))
    if not isinstance(t, Tensor):
        t = Tensor(np.asarray(t).reshape(-1), dtype=dtype)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half).astype(t.dtype)
    args = t.data.reshape(-1, 1) * freqs
    sin, cos = np.sin(args), np.cos(args)

    def backward(g):
        g_sin, g_cos = g[:, :half], g[:, half:]
        grad_t = ((g_sin * cos - g_cos * sin) * freqs).sum(axis=1)
        return (grad_t.reshape(t.shape),)

    return Tensor.from_op(np.concatenate([sin, cos], axis=1), (t,), backward, "timestep_embedding")


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup `table[ids]`; gradients scatter-add back into the table."""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if table.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= table.shape[0])):
        raise ShapeError("embedding", table.shape, ids.shape)

    def backward(g):
        grad = np.zeros_like(table.data, dtype=g.dtype)
        np.add.at(grad, ids, g)
        return (grad,)

    return Tensor.from_op(table.data[ids], (table,), backward, "embedding")


def add_conditioning(hidden: Tensor, cond: Tensor) -> Tensor:
    """Add a per-example (n, C) embedding to an (n, C) or (n, H, W, C) hidden layer."""
    if cond.ndim != 2 or hidden.shape[0] != cond.shape[0] or hidden.shape[-1] != cond.shape[1]:
        raise ShapeError("add_conditioning", hidden.shape, cond.shape)
    if hidden.ndim == 4:
        cond = reshape(cond, (cond.shape[0], 1, 1, cond.shape[1]))
    return add(hidden, cond)


def mean_pool(x: Tensor) -> Tensor:
    """Spatial average of (n, H, W, C) down to (n, C)."""
    if x.ndim != 4:
        raise ShapeError("mean_pool", x.shape, ("n", "H", "W", "C"))
    _, height, width, _ = x.shape
    count = height * width

    def backward(g):
        return (np.broadcast_to(g[:, None, None, :] / count, x.shape).astype(g.dtype),)

    return Tensor.from_op(x.data.mean(axis=(1, 2)).astype(x.dtype), (x,), backward, "mean_pool")


def avg_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping size×size average pooling; H and W must be multiples of size."""
    if x.ndim != 4 or x.shape[1] % size or x.shape[2] % size:
        raise ShapeError("avg_pool2d", x.shape, (size, size))
    n, height, width, channels = x.shape
    blocks = x.data.reshape(n, height // size, size, width // size, size, channels)

    def backward(g):
        grad = np.repeat(np.repeat(g, size, axis=1), size, axis=2) / (size * size)
        return (grad.astype(g.dtype),)

    return Tensor.from_op(blocks.mean(axis=(2, 4)).astype(x.dtype), (x,), backward, "avg_pool2d")


# ---------------------------------------------------------------------------
# Losses


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of plain arrays (predictions, ensembles)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray, label_smoothing: float = 0.0) -> Tensor:
    """Batch-mean cross entropy of (n, k) logits against integer labels."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeError("softmax_cross_entropy", logits.shape, labels.shape)
    n, k = logits.shape
    targets = np.full((n, k), label_smoothing / k, dtype=logits.dtype)
    targets[np.arange(n), labels] += 1.0 - label_smoothing

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -(targets * log_probs).sum() / n

    def backward(g):
        return (g * (np.exp(log_probs) - targets) / n,)

    return Tensor.from_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward, "softmax_cross_entropy")


def squared_error_sum(pred: Tensor, target: Operand) -> Tensor:
    """Sum of squared coordinate differences."""
    target = _wrap(target, pred)
    if pred.shape != target.shape:
        raise ShapeError("squared_error_sum", pred.shape, target.shape)
    diff = pred.data - target.data

    def backward(g):
        return 2.0 * g * diff, -2.0 * g * diff

    return Tensor.from_op(np.asarray((diff * diff).sum(), dtype=pred.dtype), (pred, target), backward, "squared_error_sum")


def mse(pred: Tensor, target: Operand) -> Tensor:
    """Mean of squared coordinate differences."""
    return scale(squared_error_sum(pred, target), 1.0 / pred.size)
