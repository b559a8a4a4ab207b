"""
Exception hierarchy for recdenoiser.

Every error raised on purpose by the library derives from RecDenoiserError so
that the command-line surface can map it onto an exit code.
"""

from typing import Any, Dict, Optional


class RecDenoiserError(Exception):
    """Base class for all library errors."""


class ShapeError(RecDenoiserError, ValueError):
    """Raised when tensor shapes do not conform to an op kind."""

    def __init__(self, op: str, *shapes: Any, detail: str = ""):
        self.op = op
        self.shapes = shapes
        shape_text = ", ".join(str(tuple(shape)) for shape in shapes)
        message = f"Shape mismatch in op '{op}': {shape_text}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ConfigError(RecDenoiserError, ValueError):
    """Raised for invalid configuration values or flag combinations."""


class DataError(RecDenoiserError, ValueError):
    """Raised for malformed input data or id/sample constraint violations."""


class CheckpointError(DataError):
    """Raised when a checkpoint is corrupted or does not match the expected config."""


class NumericalError(RecDenoiserError, ArithmeticError):
    """
    Raised when training produces a non-finite loss.

    Attributes:
        diagnostics: Batch user ids and loss parts at the time of failure
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
