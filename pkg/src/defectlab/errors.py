"""Exception types shared across the package."""

from __future__ import annotations

from collections.abc import Sequence


class DefectLabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DefectLabError, ValueError):
    """Raised when input data or parameters fail validation.

    Parsers that can address individual rows or entries collect one
    diagnostic per problem and attach the full list, so a caller sees
    every defect in the input at once instead of fixing them one by one.
    """

    def __init__(self, message: str, diagnostics: Sequence[str] = ()) -> None:
        self.diagnostics = tuple(diagnostics)
        if self.diagnostics:
            message = message + "\n" + "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(message)


class DivergenceError(DefectLabError, ArithmeticError):
    """Raised when a revision forecast cannot reach sign-off.

    Happens when no defects are ever removed on net, so the expected
    defect count never drops below the sign-off threshold.
    """


class NonConvergenceError(DefectLabError, ArithmeticError):
    """Raised when an iterative fit fails to locate an interior optimum."""
