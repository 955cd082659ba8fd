"""Exception hierarchy shared across the package."""


class GapfitError(Exception):
    """Base class for all package-specific errors."""


class InsufficientDataError(GapfitError):
    """A series does not contain enough reported values for the requested operation."""


class TapeMismatchError(GapfitError):
    """Operands of a primitive are bound to different tapes."""


class EvaluationError(GapfitError):
    """A differentiated function produced a non-finite value.

    Carries the index of the offending tape node in ``step`` (or None when the
    failure happened outside the recorded graph).
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UsageError(GapfitError):
    """Invalid configuration or arguments."""


class ParseError(GapfitError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
