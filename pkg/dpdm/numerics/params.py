"""Named parameter collections and their vector algebra."""

import math
from typing import Callable, Dict, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from .tensor import Tensor
from ..utils.errors import ValidationError


class ParameterSet(Mapping[str, np.ndarray]):
    """
    Immutable map from parameter path to array, iterated in lexicographic order.

    The concatenation of all arrays in iteration order is "the gradient
    vector" for clipping, noise and norms.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray], dtype=None):
        items: Dict[str, np.ndarray] = {}
        for name in sorted(arrays):
            arr = np.array(arrays[name], dtype=dtype or np.asarray(arrays[name]).dtype, copy=True)
            arr.flags.writeable = False
            items[name] = arr
        self._arrays = items

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}{v.shape}" for k, v in self._arrays.items())
        return f"ParameterSet({shapes})"

    @property
    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: arr.shape for name, arr in self._arrays.items()}

    @property
    def size(self) -> int:
        return int(np.sum([arr.size for arr in self._arrays.values()], dtype=np.int64))

    @property
    def dtype(self) -> np.dtype:
        for arr in self._arrays.values():
            return arr.dtype
        return np.dtype(np.float32)

    def check_compatible(self, other: "ParameterSet", what: str = "parameter sets") -> None:
        """Raise unless both sets have identical names and shapes."""
        if self.shapes != other.shapes:
            missing = sorted(set(self) ^ set(other))
            detail = f"differing names {missing}" if missing else "differing shapes"
            raise ValidationError(f"{what} do not match: {detail}")

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ParameterSet":
        return ParameterSet({name: fn(arr) for name, arr in self._arrays.items()})

    def zip_map(
        self, other: "ParameterSet", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "ParameterSet":
        self.check_compatible(other)
        return ParameterSet({name: fn(arr, other[name]) for name, arr in self._arrays.items()})

    def zeros_like(self) -> "ParameterSet":
        return self.map(np.zeros_like)

    def astype(self, dtype) -> "ParameterSet":
        return ParameterSet(self._arrays, dtype=dtype)

    def flatten(self) -> np.ndarray:
        if not self._arrays:
            return np.zeros(0, dtype=self.dtype)
        return np.concatenate([arr.reshape(-1) for arr in self._arrays.values()])

    def unflatten(self, vector: np.ndarray) -> "ParameterSet":
        """Inverse of `flatten` using this set's structure."""
        vector = np.asarray(vector)
        if vector.shape != (self.size,):
            raise ValidationError(f"vector of shape {vector.shape} does not fit {self.size} parameters")
        out, offset = {}, 0
        for name, arr in self._arrays.items():
            out[name] = vector[offset : offset + arr.size].reshape(arr.shape).astype(arr.dtype)
            offset += arr.size
        return ParameterSet(out)

    def global_norm(self) -> float:
        """L2 norm of the flattened vector, accumulated in 64-bit."""
        total = 0.0
        for arr in self._arrays.values():
            a = arr.astype(np.float64, copy=False)
            total += float(np.dot(a.reshape(-1), a.reshape(-1)))
        return math.sqrt(total)

    def scaled(self, factor: float) -> "ParameterSet":
        return self.map(lambda a: (a * factor).astype(a.dtype))

    def __add__(self, other: "ParameterSet") -> "ParameterSet":
        return self.zip_map(other, lambda a, b: a + b)

    def __sub__(self, other: "ParameterSet") -> "ParameterSet":
        return self.zip_map(other, lambda a, b: a - b)

    def allclose(self, other: "ParameterSet", rtol: float = 1e-6, atol: float = 0.0) -> bool:
        if self.shapes != other.shapes:
            return False
        return all(np.allclose(arr, other[name], rtol=rtol, atol=atol) for name, arr in self._arrays.items())

    def first_non_finite(self) -> Optional[str]:
        """Path of the first parameter holding a NaN or infinity, if any."""
        for name, arr in self._arrays.items():
            if not np.all(np.isfinite(arr)):
                return name
        return None

    def track(self) -> Dict[str, Tensor]:
        """Leaf tensors that record gradients."""
        return {name: Tensor(arr, requires_grad=True) for name, arr in self._arrays.items()}

    def constants(self) -> Dict[str, Tensor]:
        """Leaf tensors that never record gradients."""
        return {name: Tensor(arr) for name, arr in self._arrays.items()}

    @classmethod
    def sum_all(cls, sets: Sequence["ParameterSet"]) -> "ParameterSet":
        """Fixed-order pairwise (tree) reduction; independent of how the list was produced."""
        if not sets:
            raise ValidationError("cannot sum an empty list of parameter sets")
        level = list(sets)
        while len(level) > 1:
            paired = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                paired.append(level[-1])
            level = paired
        return level[0]


def uniform_fan_in(rng: np.random.Generator, shape: Sequence[int], fan_in: int, dtype=np.float32) -> np.ndarray:
    """Zero-mean uniform init with half-width 1/sqrt(fan_in)."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype)
