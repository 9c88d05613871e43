"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit 1, file
format / I/O problems exit 2, detector adapter failures exit 3.
"""

from __future__ import annotations


class TtaboxError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TtaboxError, ValueError):
    """Invalid argument, configuration value, or semantically bad input data."""


class FileFormatError(TtaboxError):
    """A data file could not be parsed against its expected schema."""


class DetectorError(TtaboxError):
    """A detector adapter failed; carries the view and image it failed on."""

    def __init__(self, message: str, *, image_id: int | None = None, view=None):
        super().__init__(message)
        self.image_id = image_id
        self.view = view


class GenerationError(TtaboxError):
    """Synthetic scene generation could not satisfy its constraints."""


class UndefinedMetricError(TtaboxError, ValueError):
    """Metric requested over an empty ground-truth population."""
