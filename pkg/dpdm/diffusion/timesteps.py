"""Mixture-of-uniforms timestep sampling."""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..config import TIMESTEP_MIXTURE_PRESETS
from ..utils.errors import ValidationError

PRESET_GRID = 1000


@dataclass(frozen=True)
class TimestepMixture:
    """
    Σ w_i · U{l_i..u_i} over integer timesteps of a schedule with T steps.

    Components are inclusive; a lower bound of 0 is drawn as 1, the first
    valid timestep.
    """

    weights: Tuple[float, ...]
    bounds: Tuple[Tuple[int, int], ...]
    T: int

    def __post_init__(self):
        if len(self.weights) == 0 or len(self.weights) != len(self.bounds):
            raise ValidationError("mixture needs one (lower, upper) bound per weight")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValidationError(f"mixture weights must be non-negative and sum to 1, got {self.weights}")
        if self.bounds[0][0] < 0 or self.bounds[-1][1] > self.T:
            raise ValidationError(f"mixture bounds must lie in [0, {self.T}]")
        for lower, upper in self.bounds:
            if max(lower, 1) > upper:
                raise ValidationError(f"empty mixture component [{lower}, {upper}]")
        for (_, prev_upper), (lower, _) in zip(self.bounds, self.bounds[1:]):
            if prev_upper > lower:
                raise ValidationError("mixture components must be ordered: u_{k-1} <= l_k")

    @property
    def lows(self) -> np.ndarray:
        return np.array([max(lower, 1) for lower, _ in self.bounds], dtype=np.int64)

    @property
    def highs(self) -> np.ndarray:
        return np.array([upper for _, upper in self.bounds], dtype=np.int64)

    def probability_of(self, lower: int, upper: int) -> float:
        """Exact mass the mixture puts on the inclusive range [lower, upper]."""
        total = 0.0
        for w, lo, hi in zip(self.weights, self.lows, self.highs):
            overlap = min(hi, upper) - max(lo, lower) + 1
            if overlap > 0:
                total += w * overlap / (hi - lo + 1)
        return total

    @classmethod
    def uniform(cls, T: int) -> "TimestepMixture":
        return cls(weights=(1.0,), bounds=((0, T),), T=T)

    @classmethod
    def from_preset(cls, name: str, T: int) -> "TimestepMixture":
        """Presets are stated on a 1000-step grid and rescaled to T."""
        if name not in TIMESTEP_MIXTURE_PRESETS:
            raise ValidationError(f"unknown timestep mixture '{name}'")
        weights, bounds = TIMESTEP_MIXTURE_PRESETS[name]
        scaled = tuple(
            (int(round(lower * T / PRESET_GRID)), int(round(upper * T / PRESET_GRID)))
            for lower, upper in bounds
        )
        return cls(weights=tuple(weights), bounds=scaled, T=T)

    @classmethod
    def from_boundaries(cls, weights: Sequence[float], boundaries: Sequence[int], T: int) -> "TimestepMixture":
        """Build from contiguous edges l_1, u_1=l_2, ..., u_K."""
        if len(boundaries) != len(weights) + 1:
            raise ValidationError("need K+1 boundaries for K weights")
        bounds = tuple((int(boundaries[i]), int(boundaries[i + 1])) for i in range(len(weights)))
        return cls(weights=tuple(float(w) for w in weights), bounds=bounds, T=T)


def sample_timestep(mixture: TimestepMixture, rng: np.random.Generator) -> int:
    """Pick component i with probability w_i, then t uniformly in [l_i, u_i]."""
    component = int(rng.choice(len(mixture.weights), p=np.asarray(mixture.weights)))
    return int(rng.integers(mixture.lows[component], mixture.highs[component] + 1))


def sample_timesteps(mixture: TimestepMixture, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorised `sample_timestep` for `size` independent draws."""
    components = rng.choice(len(mixture.weights), p=np.asarray(mixture.weights), size=size)
    return rng.integers(mixture.lows[components], mixture.highs[components] + 1)
