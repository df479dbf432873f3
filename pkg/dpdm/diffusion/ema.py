"""Exponential moving average of parameters."""

from dataclasses import dataclass

from ..numerics import ParameterSet
from ..utils.errors import ValidationError


@dataclass(frozen=True)
class EmaTracker:
    """shadow ← decay·shadow + (1−decay)·params after every update."""

    decay: float
    shadow: ParameterSet

    def __post_init__(self):
        if not 0.0 <= self.decay <= 1.0:
            raise ValidationError(f"EMA decay must lie in [0, 1], got {self.decay}")

    @classmethod
    def start(cls, params: ParameterSet, decay: float) -> "EmaTracker":
        return cls(decay=decay, shadow=params)


def ema_update(tracker: EmaTracker, params: ParameterSet) -> EmaTracker:
    tracker.shadow.check_compatible(params, "EMA shadow and parameters")
    d = tracker.decay
    shadow = tracker.shadow.zip_map(params, lambda s, p: (d * s + (1.0 - d) * p).astype(s.dtype))
    return EmaTracker(decay=d, shadow=shadow)
