"""Exception types raised across the package."""


class CosshellError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CosshellError, ValueError):
    """Input violates a documented precondition (shape, finiteness, range)."""


class InfeasibleStateError(CosshellError):
    """A state with J <= 0 (or t <= 0) was passed where J > 0 is required.

    ``index`` holds the offending quadrature point (or node) when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateStateError(CosshellError):
    """A reconstruction hit a zero vector (zero director, zero normal sum)."""


class ConfigError(CosshellError):
    """Malformed or invalid scenario configuration."""
