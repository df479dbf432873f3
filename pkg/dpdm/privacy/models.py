"""Data models for privacy accounting."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..utils.errors import PrivacyError


@dataclass(frozen=True)
class PrivacySpend:
    """An (ε, δ) guarantee; smaller is more private."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise PrivacyError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise PrivacyError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class RdpCurve:
    """Rényi-DP ε_α for strictly increasing orders α > 1."""

    orders: Tuple[float, ...]
    epsilons: Tuple[float, ...]

    def __post_init__(self):
        if len(self.orders) != len(self.epsilons):
            raise PrivacyError("RDP curve needs one epsilon per order")
        orders = np.asarray(self.orders, dtype=np.float64)
        if orders.size and (orders.min() <= 1 or np.any(np.diff(orders) <= 0)):
            raise PrivacyError("RDP orders must be > 1 and strictly increasing")
        if any(e < 0 for e in self.epsilons):
            raise PrivacyError("RDP epsilons must be >= 0")

    def __len__(self) -> int:
        return len(self.orders)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.epsilons, dtype=np.float64)


@dataclass(frozen=True)
class MechanismSpec:
    """T_steps compositions of a Poisson-subsampled Gaussian with rate q and multiplier σ."""

    noise_multiplier: float
    sampling_rate: float
    steps: int

    def __post_init__(self):
        if self.noise_multiplier < 0:
            raise PrivacyError(f"noise multiplier must be >= 0, got {self.noise_multiplier}")
        if not 0 < self.sampling_rate <= 1:
            raise PrivacyError(f"sampling rate must lie in (0, 1], got {self.sampling_rate}")
        if self.steps < 0:
            raise PrivacyError(f"steps must be >= 0, got {self.steps}")
