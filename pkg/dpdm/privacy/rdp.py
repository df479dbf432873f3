"""Rényi-DP of the Poisson-subsampled Gaussian mechanism.

All accounting runs in 64-bit with log-sum-exp stabilisation, on the integer
order grid α ∈ {2, …, 256}.
"""

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .models import MechanismSpec, RdpCurve
from ..config import RDP_ORDERS
from ..utils.errors import PrivacyError


def gaussian_rdp(sigma: float, alpha: float) -> float:
    """α / (2σ²): order-α Rényi divergence between N(0,σ²) and N(1,σ²)."""
    if not sigma > 0:
        raise PrivacyError(f"sigma must be > 0, got {sigma}")
    if not alpha > 1:
        raise PrivacyError(f"RDP order must be > 1, got {alpha}")
    return alpha / (2.0 * sigma**2)


def subsampled_gaussian_rdp(sigma: float, q: float, alpha: int) -> float:
    """
    Exact integer-order RDP of the Poisson-subsampled Gaussian:

        (1/(α−1)) · log Σ_k C(α,k) (1−q)^{α−k} q^k exp(k(k−1)/(2σ²))
    """
    if not sigma > 0:
        raise PrivacyError(f"sigma must be > 0, got {sigma}")
    if not 0 < q <= 1:
        raise PrivacyError(f"sampling rate must lie in (0, 1], got {q}")
    if int(alpha) != alpha or alpha < 2:
        raise PrivacyError(f"order must be an integer >= 2, got {alpha}")
    alpha = int(alpha)
    if q == 1.0:
        return gaussian_rdp(sigma, alpha)

    k = np.arange(alpha + 1, dtype=np.float64)
    log_binom = gammaln(alpha + 1) - gammaln(k + 1) - gammaln(alpha - k + 1)
    log_terms = log_binom + (alpha - k) * math.log1p(-q) + k * math.log(q) + k * (k - 1) / (2.0 * sigma**2)
    return max(float(logsumexp(log_terms)), 0.0) / (alpha - 1)


def rdp_curve(sigma: float, q: float, orders: Sequence[int] = RDP_ORDERS) -> RdpCurve:
    """Per-step curve over `orders`."""
    return RdpCurve(
        orders=tuple(float(a) for a in orders),
        epsilons=tuple(subsampled_gaussian_rdp(sigma, q, a) for a in orders),
    )


def compose(curve: RdpCurve, steps: int) -> RdpCurve:
    """RDP composes additively: T_steps copies multiply every ε_α."""
    if steps < 0:
        raise PrivacyError(f"steps must be >= 0, got {steps}")
    return RdpCurve(orders=curve.orders, epsilons=tuple(steps * e for e in curve.epsilons))


def rdp_to_dp(curve: RdpCurve, delta: float) -> Tuple[float, float]:
    """
    Classic conversion ε = min_α [ε_α + log(1/δ)/(α−1)].

    Returns:
        (epsilon, minimizing order)
    """
    if not 0 < delta < 1:
        raise PrivacyError(f"delta must lie in (0, 1), got {delta}")
    if len(curve) == 0:
        raise PrivacyError("cannot convert an empty RDP curve")
    orders = np.asarray(curve.orders, dtype=np.float64)
    eps = curve.as_array() + math.log(1.0 / delta) / (orders - 1.0)
    # Ties go to the largest order
    best = len(eps) - 1 - int(np.argmin(eps[::-1]))
    return float(eps[best]), float(orders[best])


def epsilon_for(mechanism: MechanismSpec, delta: float, orders: Sequence[int] = RDP_ORDERS) -> Tuple[float, float]:
    """(ε, α*) spent by a mechanism; σ = 0 means no privacy (ε = ∞)."""
    if mechanism.noise_multiplier == 0:
        return math.inf, math.nan
    per_step = rdp_curve(mechanism.noise_multiplier, mechanism.sampling_rate, orders)
    return rdp_to_dp(compose(per_step, mechanism.steps), delta)


class PrivacyAccountant:
    """Incremental ε for a training loop: the per-step curve is computed once."""

    def __init__(self, noise_multiplier: float, sampling_rate: float, orders: Sequence[int] = RDP_ORDERS):
        MechanismSpec(noise_multiplier, sampling_rate, 0)
        self.noise_multiplier = noise_multiplier
        self.sampling_rate = sampling_rate
        self.per_step = rdp_curve(noise_multiplier, sampling_rate, orders) if noise_multiplier > 0 else None

    def epsilon_after(self, steps: int, delta: float) -> float:
        if steps == 0:
            return 0.0
        if self.per_step is None:
            return math.inf
        return rdp_to_dp(compose(self.per_step, steps), delta)[0]
