"""Idle-power, cold-start breakeven and eviction-policy toolkit for GPU model serving."""

__version__ = "0.1.0"


class DomainError(ValueError):
    """Raised when an input falls outside an operation's domain."""


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based, or None if not line-specific."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
