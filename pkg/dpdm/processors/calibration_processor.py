"""Noise calibration and privacy-level sweeps."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .datasets import DomainData
from .run_config import RunConfig
from .run_directory import RunDirectory
from ..config import CALIBRATION_REPORT
from ..privacy.calibrate import SweepPoint, calibrate_sigma, epsilon_sweep
from ..privacy.models import PrivacySpend, RdpCurve
from ..privacy.rdp import compose, rdp_curve, rdp_to_dp


@dataclass
class CalibrationReport:
    sampling_rate: float
    steps: int
    target: PrivacySpend
    noise_multiplier: float
    accounted_epsilon: float
    optimal_order: float
    # composed over all steps, before conversion to (ε, δ)
    curve: RdpCurve
    sweep: List[SweepPoint] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"sampling_rate = {self.sampling_rate!r}",
            f"steps = {self.steps}",
            f"target_epsilon = {self.target.epsilon!r}",
            f"delta = {self.target.delta!r}",
            f"noise_multiplier = {self.noise_multiplier!r}",
            f"accounted_epsilon = {self.accounted_epsilon!r}",
            f"optimal_order = {self.optimal_order:g}",
        ]
        for order, epsilon in zip(self.curve.orders, self.curve.epsilons):
            lines.append(f"rdp_curve.{order:g} = {epsilon!r}")
        for point in self.sweep:
            lines.append(f"sweep = {point.epsilon!r},{point.steps},{point.noise_multiplier!r}")
        return "\n".join(lines) + "\n"


class CalibrationProcessor:
    def __init__(self, config: RunConfig, run_dir: RunDirectory, data: Optional[DomainData] = None):
        self.config = config
        self.run_dir = run_dir
        self.data = data or DomainData(config)

    def calibrate(self) -> CalibrationReport:
        """sigma for the configured (B, N, steps) and target epsilon, plus an optional sweep."""
        n = self.data.train_size
        q = min(1.0, self.config["batch_size"] / n)
        steps = self.config["steps"]
        delta = self.config["delta"] if self.config["delta"] is not None else 1.0 / n
        target = PrivacySpend(self.config["target_epsilon"], delta)
        sigma = calibrate_sigma(q, steps, target)
        curve = compose(rdp_curve(sigma, q), steps)
        accounted, order = rdp_to_dp(curve, delta)
        sweep = epsilon_sweep(q, steps, target.epsilon, self.config["epsilons"], delta) if self.config["epsilons"] else []
        return CalibrationReport(
            sampling_rate=q,
            steps=steps,
            target=target,
            noise_multiplier=sigma,
            accounted_epsilon=accounted,
            optimal_order=order,
            curve=curve,
            sweep=sweep,
        )

    def write(self, report: CalibrationReport) -> Path:
        path = self.run_dir.reports / CALIBRATION_REPORT
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_text(), encoding="utf-8")
        return path
