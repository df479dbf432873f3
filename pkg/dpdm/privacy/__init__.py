"""Rényi-DP accounting for the Poisson-subsampled Gaussian mechanism."""

from .calibrate import SweepPoint, calibrate_sigma, epsilon_sweep
from .models import MechanismSpec, PrivacySpend, RdpCurve
from .rdp import (
    PrivacyAccountant,
    compose,
    epsilon_for,
    gaussian_rdp,
    rdp_curve,
    rdp_to_dp,
    subsampled_gaussian_rdp,
)

__all__ = [
    "PrivacySpend",
    "RdpCurve",
    "MechanismSpec",
    "gaussian_rdp",
    "subsampled_gaussian_rdp",
    "rdp_curve",
    "compose",
    "rdp_to_dp",
    "epsilon_for",
    "PrivacyAccountant",
    "calibrate_sigma",
    "epsilon_sweep",
    "SweepPoint",
]
