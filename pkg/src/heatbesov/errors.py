"""Exception types raised across the package."""

from __future__ import annotations


class HeatBesovError(Exception):
    """Base class for all package errors."""


class DomainError(HeatBesovError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericError(HeatBesovError, ArithmeticError):
    """A filter or kernel evaluation produced non-finite values."""


class AccuracyError(HeatBesovError, RuntimeError):
    """A quadrature or truncation bound could not meet the requested tolerance."""


class ConstructionError(HeatBesovError, RuntimeError):
    """A filter system could not be built (e.g. a normaliser vanished)."""


class ConfigError(HeatBesovError, ValueError):
    """A run configuration is malformed; ``section`` and ``field`` locate the problem."""

    def __init__(self, section: str, field: str | None, message: str):
        self.section = section
        self.field = field
        where = f"[{section}]" if field is None else f"[{section}] {field}"
        super().__init__(f"{where}: {message}")
