"""This module contains all custom exceptions used by ``opencqed``."""

from __future__ import annotations

from typing import Any


class ConfigError(ValueError):
    """Should be raised when a run configuration or a sampling setting is invalid."""

    def __init__(self, message: str, *args: Any, field: str | None = None, line: int | None = None) -> None:
        """Init of the ``ConfigError``.

        Args:
            message: Description of the problem.
            field: Dotted path of the offending configuration field, if known.
            line: Line of the configuration document, if known.
        """
        location = []
        if field is not None:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}", *args)
        self.field = field
        self.line = line


class InvalidModelError(ValueError):
    """Should be raised when a model is constructed with parameters that make it unphysical."""


class DataError(Exception):
    """Base class of the errors caused by the input data rather than by the configuration or the numerics."""


class MissingDataError(DataError):
    """Should be raised when an input file does not exist or holds no data rows."""


class InsufficientDataError(DataError):
    """Should be raised when there is too little data for an estimate."""


class EmptyPoolError(DataError):
    """Should be raised when no estimate survives the rejection predicate of a pooling step."""


class NumericalError(Exception):
    """Base class of the numerical failures."""


class DomainError(NumericalError, ValueError):
    """Should be raised when a figure of merit is evaluated outside of its mathematical domain."""


class NoConvergenceError(NumericalError):
    """Should be raised when a fit or search cannot converge, e.g. because it is underdetermined."""


class SingularJacobianError(NumericalError):
    """Should be raised when a fit has unidentifiable parameters."""


class InfeasibleBudgetError(NumericalError):
    """Should be raised when a loss budget would need a non-positive or unbounded loss channel."""


class SingularFieldError(NumericalError):
    """Should be raised when a magnetic field is evaluated on the rim of a magnet, where it diverges."""


class ZeroFieldError(NumericalError):
    """Should be raised when a direction is requested for a vanishing field."""
