"""Exception hierarchy shared by all modules.

Input-validation failures map to CLI exit code 2, numeric failures to 3.
"""


class FerasecError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FerasecError):
    """An argument is outside the operation's valid domain."""


class DimensionError(DomainError):
    """Array shapes or lengths are inconsistent."""


class DegenerateInputError(DomainError):
    """A correlation input has zero variance (e.g. a constant radar frame)."""


class FormatError(FerasecError):
    """A binary or text file does not conform to its declared format."""

    def __init__(self, message: str, *, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class GenerationError(DomainError):
    """A synthetic trajectory left the simulated detection range."""


class TrainingError(FerasecError):
    """The training corpus cannot be used to fit a model."""


class NumericError(FerasecError):
    """A computation produced non-finite values."""
