"""Per-example gradient clipping."""

import math

from ..numerics import ParameterSet
from ..utils.errors import ValidationError


def clip(v: ParameterSet, clip_norm: float) -> ParameterSet:
    """min(1, C/‖v‖₂)·v over the flattened vector; C = inf returns v unchanged."""
    if not clip_norm > 0:
        raise ValidationError(f"clip norm must be > 0, got {clip_norm}")
    if math.isinf(clip_norm):
        return v
    norm = v.global_norm()
    if norm <= clip_norm:
        return v
    return v.scaled(clip_norm / norm)
