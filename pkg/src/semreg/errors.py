"""Shared exception types."""


class DegenerateInputError(ValueError):
    """Raised when a geometric solve has no well-posed answer (rank deficiency, too few points)."""


class ParseError(ValueError):
    """Raised by file readers; message carries the offending line or byte offset."""
