"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the front end can
translate library failures without a lookup table.
"""

from __future__ import annotations


class RadarError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(RadarError, ValueError):
    """Invalid input value: configuration, scene or argument."""

    exit_code = 2


class ConfigError(ValidationError):
    """Configuration is inconsistent or unusable for the requested operation."""


class DegenerateDirectionError(ValidationError):
    """Direction for which the azimuth angle is undefined (nu = +/-1)."""


class SceneError(ValidationError):
    """A scatterer lies outside the unambiguous range/velocity limits."""

    def __init__(self, index: int, message: str):
        super().__init__(f"scatterer {index}: {message}")
        self.index = index


class FormatError(RadarError):
    """Malformed file contents."""

    exit_code = 3


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class DimensionMismatchError(FormatError):
    pass


class NumericalError(RadarError, ArithmeticError):
    """Internal numerical failure."""

    exit_code = 4


class SingularSliceError(NumericalError):
    """Range slice with zero energy; its covariance cannot be inverted."""
