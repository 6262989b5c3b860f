"""Exception types shared across the package."""

from __future__ import annotations


class DenserouteError(Exception):
    """Base class for package errors."""


class DomainError(DenserouteError):
    """A coordinate, cell index or path left the grid domain."""


class ValidationError(DenserouteError):
    """Bad input data: scenario schema, balance, shape or sign violations."""


class FieldParseError(ValidationError):
    """Malformed field CSV; carries the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PreconditionError(DenserouteError):
    """A documented operation precondition does not hold for these inputs."""


class UnsupportedGeometryError(DenserouteError):
    """Cost-field geometry outside the closed-form oracle's scope."""


class NumericalError(DenserouteError):
    """Iterative numerics failed (non-convergence, broken descent, NaNs)."""
