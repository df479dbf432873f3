"""Custom exceptions for dpdm."""


class DpdmError(Exception):
    """Base exception for dpdm."""

    pass


class ConfigError(DpdmError, ValueError):
    """Invalid or unknown configuration key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ValidationError(DpdmError, ValueError):
    """A domain-type invariant was violated."""

    pass


class ShapeError(DpdmError, ValueError):
    """Operand shapes do not fit the operation."""

    def __init__(self, op: str, left: tuple, right: tuple):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{op}: incompatible shapes {self.left} and {self.right}")


class GradientError(DpdmError):
    """Gradient computation requested on an invalid graph or batch."""

    pass


class NonFiniteGradientError(GradientError):
    """A gradient coordinate is NaN or infinite."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"non-finite gradient in parameter '{path}'")


class CheckpointError(DpdmError):
    """Checkpoint file is malformed or does not match the model."""

    pass


class ParseError(DpdmError):
    """Error parsing IDX or config files."""

    pass


class PrivacyError(DpdmError):
    """Accountant domain error or unreachable privacy target."""

    pass


class EvaluationError(DpdmError):
    """Evaluation inputs are inconsistent."""

    pass


class ReportError(DpdmError, ValueError):
    """A report row does not fit its header, or the report cannot be written."""

    pass
