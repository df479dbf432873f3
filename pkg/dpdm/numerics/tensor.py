"""Immutable tensors and the reverse-mode gradient tape."""

import contextlib
import contextvars
import itertools
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import GradientError

DEFAULT_DTYPE = np.float32

# Returns one gradient (or None) per parent, given the gradient of the output
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_node_ids = itertools.count()
_grad_enabled: contextvars.ContextVar = contextvars.ContextVar("dpdm_grad_enabled", default=True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (sampling, embedding, finite differences)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


def _as_array(data, dtype) -> np.ndarray:
    if dtype is None:
        if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
            dtype = data.dtype
        else:
            dtype = DEFAULT_DTYPE
    arr = np.array(data, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


class Tensor:
    """
    An immutable n-dimensional array that can sit on a gradient tape.

    32-bit by default; 64-bit when built from float64 data, which is the
    verification mode used by gradient checks.
    """

    __slots__ = ("data", "id", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, *, requires_grad: bool = False, dtype=None):
        self.data: np.ndarray = _as_array(data, dtype)
        self.id: int = next(_node_ids)
        self.requires_grad = bool(requires_grad) and is_grad_enabled()
        self.op = "leaf"
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
        op: str,
    ) -> "Tensor":
        """Wrap an op result; records the graph edge only when a parent is tracked."""
        out = cls.__new__(cls)
        arr = np.asarray(data)
        arr.flags.writeable = False
        out.data = arr
        out.id = next(_node_ids)
        out.op = op
        tracked = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise GradientError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.scale(self, -1.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op})"


class Tape:
    """
    The recorded graph behind a scalar root, in topological order.

    Args:
        root: Scalar loss node
        leaves: Parameter path -> leaf tensor the gradient is reported for
    """

    def __init__(self, root: Tensor, leaves: Optional[Dict[str, Tensor]] = None):
        if root.size != 1:
            raise GradientError(f"backward needs a scalar root, got shape {root.shape}")
        self.root = root
        self.leaves: Dict[str, Tensor] = dict(leaves or {})
        self.nodes: List[Tensor] = self._topological_order(root)

    @staticmethod
    def _topological_order(root: Tensor) -> List[Tensor]:
        # Iterative DFS; deep conv stacks would blow the recursion limit
        order: List[Tensor] = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.id in visited:
                continue
            visited.add(node.id)
            stack.append((node, True))
            for parent in node._parents:
                if parent.id not in visited:
                    stack.append((parent, False))
        return order

    def run(self) -> Dict[int, np.ndarray]:
        """Propagate from the root; returns gradients of tracked leaves by node id."""
        grads: Dict[int, np.ndarray] = {self.root.id: np.ones_like(self.root.data)}
        leaf_grads: Dict[int, np.ndarray] = {}
        for node in reversed(self.nodes):
            grad = grads.pop(node.id, None)
            if grad is None:
                continue
            if node._backward is None:
                leaf_grads[node.id] = grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent.id in grads:
                    grads[parent.id] = grads[parent.id] + parent_grad
                else:
                    grads[parent.id] = parent_grad
        return leaf_grads
