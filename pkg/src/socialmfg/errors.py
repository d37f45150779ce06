"""Exception types raised across the package."""

from __future__ import annotations

from typing import Any, Sequence


class SocialMFGError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SocialMFGError, ValueError):
    """Malformed or inconsistent input (dimensions, simplex violations, ...)."""


class UnsupportedSizeError(InvalidInputError):
    """Problem too large for an exhaustive routine."""


class NumericDomainError(SocialMFGError, ArithmeticError):
    """A cost evaluation left its domain or produced a non-finite value."""

    def __init__(self, message: str, index: tuple[int, int] | None = None):
        if index is not None:
            message = f"{message} at (i={index[0]}, j={index[1]})"
        super().__init__(message)
        self.index = index


class ConvergenceError(SocialMFGError, RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries whatever the solver had when it gave up so callers can persist
    or inspect it.
    """

    def __init__(
        self,
        message: str,
        *,
        residual: float,
        best: Any = None,
        history: Sequence[float] | dict[str, Sequence[float]] | None = None,
        step: int | None = None,
    ):
        if step is not None:
            message = f"{message} (time step {step})"
        super().__init__(f"{message}; last residual {residual:.3e}")
        self.residual = residual
        self.best = best
        self.history = history
        self.step = step
