"""Exception types shared across the package."""

from __future__ import annotations

__all__ = ["ConfigError", "DomainError", "DegenerateFitError", "NumericError"]


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (unknown key, bad type, bad value)."""


class DomainError(ValueError):
    """A point or object lies outside the domain it is evaluated on."""


class DegenerateFitError(RuntimeError):
    """A regression or rescaling has too few usable points to proceed."""


class NumericError(RuntimeError):
    """A computation produced non-finite or otherwise unusable numbers."""
