"""Noise schedules and the closed-form forward process."""

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..config import DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TIMESTEPS
from ..numerics import Tensor, ops
from ..utils.errors import ShapeError, ValidationError

Timesteps = Union[int, np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    """β_t and ᾱ_t tables for t = 1..T (index t-1)."""

    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        if self.T < 1 or self.beta.shape != (self.T,) or self.alpha_bar.shape != (self.T,):
            raise ValidationError(f"schedule tables must have length T={self.T}")
        if not np.all((self.beta > 0) & (self.beta < 1)):
            raise ValidationError("every beta must lie in (0, 1)")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValidationError("alpha_bar must be strictly decreasing")

    def check_timesteps(self, t: Timesteps) -> np.ndarray:
        arr = np.asarray(t, dtype=np.int64)
        if arr.size and (arr.min() < 1 or arr.max() > self.T):
            raise ValidationError(f"timestep out of range [1, {self.T}]: {arr.min()}..{arr.max()}")
        return arr

    def alpha(self, t: int) -> float:
        return float(1.0 - self.beta[t - 1])

    def beta_at(self, t: int) -> float:
        return float(self.beta[t - 1])

    def alpha_bar_at(self, t: Timesteps) -> np.ndarray:
        return self.alpha_bar[self.check_timesteps(t) - 1]


def make_linear_schedule(
    T: int = DEFAULT_TIMESTEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """β linearly spaced from beta_start to beta_end inclusive; ᾱ by running product."""
    if T < 1:
        raise ValidationError(f"T must be at least 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ValidationError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - beta)
    return NoiseSchedule(T=T, beta=beta, alpha_bar=alpha_bar)


def noise_sample(x0, eps, alpha_bar) -> Tensor:
    """
    √ᾱ·x0 + √(1−ᾱ)·eps with ᾱ a scalar or one value per leading row.

    Both x0 and eps may be tracked tensors.
    """
    x0 = x0 if isinstance(x0, Tensor) else Tensor(x0)
    eps = eps if isinstance(eps, Tensor) else Tensor(eps, dtype=x0.dtype)
    if x0.shape != eps.shape:
        raise ShapeError("forward_noise", x0.shape, eps.shape)
    alpha_bar = np.asarray(alpha_bar, dtype=np.float64)
    if alpha_bar.ndim == 1 and x0.ndim > 1:
        alpha_bar = alpha_bar.reshape((-1,) + (1,) * (x0.ndim - 1))
    signal = np.sqrt(alpha_bar).astype(x0.dtype)
    noise = np.sqrt(1.0 - alpha_bar).astype(x0.dtype)
    return ops.add(ops.mul(x0, signal), ops.mul(eps, noise))


def forward_noise(schedule: NoiseSchedule, x0, t: Timesteps, eps) -> Tensor:
    """Noisy sample x_t; `t` is one timestep or one per leading row of x0."""
    return noise_sample(x0, eps, schedule.alpha_bar_at(t))
