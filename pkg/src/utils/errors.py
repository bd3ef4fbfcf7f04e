"""
Exception hierarchy for the localization simulator.
Every failure a caller is expected to handle derives from LocalizationError.
"""

from typing import Optional, Tuple


class LocalizationError(Exception):
    """Root of all simulator errors."""


class ConfigError(LocalizationError, ValueError):
    """
    Invalid experiment configuration.

    Args:
        field: Dotted path of the offending field (e.g. 'mobility.speed_kmh')
        message: Human-readable description of the problem
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class DegenerateGeometryError(LocalizationError, ValueError):
    """Coincident nodes or a numerically singular normal matrix."""

    def __init__(self, message: str,
                 pair: Optional[Tuple[str, str]] = None,
                 condition: Optional[float] = None):
        self.pair = pair
        self.condition = condition
        super().__init__(message)


class DivergenceError(LocalizationError, RuntimeError):
    """An iterate left the solver's safety box."""
