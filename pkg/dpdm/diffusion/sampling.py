"""Ancestral sampling from a trained denoiser."""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from .schedule import NoiseSchedule
from ..numerics import ParameterSet, Tensor, no_grad

logger = logging.getLogger(__name__)

DATA_RANGE = (-1.0, 1.0)


def ancestral_sample_batch(
    model,
    params: ParameterSet,
    schedule: NoiseSchedule,
    class_labels: Optional[Sequence[int]],
    rng: np.random.Generator,
    n: Optional[int] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> np.ndarray:
    """
    Draw n images with the fixed-variance (σ_t² = β_t) reverse chain.

    Starts from x_T ~ N(0, I) and performs exactly T model evaluations;
    the final step adds no noise. Returns (n, H, W, C) clamped to [-1, 1].
    """
    labels = None if class_labels is None else np.asarray(class_labels, dtype=np.int64).reshape(-1)
    if n is None:
        n = len(labels) if labels is not None else 1
    dtype = params.dtype
    x = rng.standard_normal((n,) + tuple(model.image_shape)).astype(dtype)
    if n == 0:
        return x
    p = params.constants()
    with no_grad():
        for t in range(schedule.T, 0, -1):
            t_batch = np.full(n, t, dtype=np.int64)
            eps_pred = model.apply(p, Tensor(x, dtype=dtype), t_batch, labels).data
            beta = schedule.beta_at(t)
            coef = beta / np.sqrt(1.0 - schedule.alpha_bar[t - 1])
            x = (x - coef * eps_pred) / np.sqrt(1.0 - beta)
            if t > 1:
                x = x + np.sqrt(beta) * rng.standard_normal(x.shape)
            x = x.astype(dtype)
            if progress is not None:
                progress(schedule.T - t + 1)
    return np.clip(x, *DATA_RANGE)


def ancestral_sample(
    model,
    params: ParameterSet,
    schedule: NoiseSchedule,
    class_label: Optional[int],
    rng: np.random.Generator,
) -> np.ndarray:
    """One image of shape (H, W, C)."""
    labels = None if class_label is None else [class_label]
    return ancestral_sample_batch(model, params, schedule, labels, rng, n=1)[0]


def balanced_labels(n: int, num_classes: int) -> np.ndarray:
    """Round-robin class labels: n // k (or one more) per class."""
    return np.arange(n, dtype=np.int64) % max(num_classes, 1)
