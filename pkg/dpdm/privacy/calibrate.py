"""Noise calibration against a target (ε, δ)."""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .models import MechanismSpec, PrivacySpend
from .rdp import epsilon_for
from ..config import CALIBRATION_RELATIVE_TOLERANCE, RDP_ORDERS, SIGMA_BRACKET
from ..utils.errors import PrivacyError

logger = logging.getLogger(__name__)

MAX_BISECTION_STEPS = 200


def calibrate_sigma(
    q: float,
    steps: int,
    target: PrivacySpend,
    bracket: Tuple[float, float] = SIGMA_BRACKET,
    orders: Sequence[int] = RDP_ORDERS,
) -> float:
    """
    Bisection for σ with |ε(σ) − ε_target| ≤ 1e-3·ε_target.

    Relies on ε strictly decreasing in σ.
    """
    if not target.epsilon > 0:
        raise PrivacyError(f"target epsilon must be > 0, got {target.epsilon}")
    if steps < 1:
        raise PrivacyError("calibration needs at least one step")

    def eps(sigma: float) -> float:
        return epsilon_for(MechanismSpec(sigma, q, steps), target.delta, orders)[0]

    lo, hi = bracket
    tolerance = CALIBRATION_RELATIVE_TOLERANCE * target.epsilon
    eps_lo, eps_hi = eps(lo), eps(hi)
    if eps_lo < target.epsilon - tolerance or eps_hi > target.epsilon + tolerance:
        raise PrivacyError(
            f"target epsilon {target.epsilon} unreachable for sigma in [{lo}, {hi}] "
            f"(epsilon ranges over [{eps_hi:.4g}, {eps_lo:.4g}])"
        )
    if abs(eps_lo - target.epsilon) <= tolerance:
        return lo
    if abs(eps_hi - target.epsilon) <= tolerance:
        return hi

    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        value = eps(mid)
        if abs(value - target.epsilon) <= tolerance:
            logger.debug(f"calibrated sigma={mid:.6g} (epsilon={value:.6g})")
            return mid
        if value > target.epsilon:
            lo = mid
        else:
            hi = mid
    raise PrivacyError(f"calibration did not converge within [{bracket[0]}, {bracket[1]}]")


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    steps: int
    noise_multiplier: float


def epsilon_sweep(
    q: float,
    base_steps: int,
    base_epsilon: float,
    epsilons: Sequence[float],
    delta: float,
) -> List[SweepPoint]:
    """
    Several privacy levels from one recipe: iterations scale linearly with ε
    and σ is recalibrated for each level.
    """
    points = []
    for epsilon in epsilons:
        steps = max(1, int(math.ceil(base_steps * epsilon / base_epsilon)))
        sigma = calibrate_sigma(q, steps, PrivacySpend(epsilon, delta))
        points.append(SweepPoint(epsilon=epsilon, steps=steps, noise_multiplier=sigma))
    return points
