"""Utility modules."""

from .errors import (
    DpdmError,
    ConfigError,
    ValidationError,
    ShapeError,
    GradientError,
    NonFiniteGradientError,
    CheckpointError,
    ParseError,
    PrivacyError,
    EvaluationError,
    ReportError,
)
from .rng import RngStreams

__all__ = [
    "DpdmError",
    "ConfigError",
    "ValidationError",
    "ShapeError",
    "GradientError",
    "NonFiniteGradientError",
    "CheckpointError",
    "ParseError",
    "PrivacyError",
    "EvaluationError",
    "ReportError",
    "RngStreams",
]
