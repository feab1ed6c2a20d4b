"""Exception hierarchy shared by the estimator stack.

Every error raised on purpose by the library derives from ``HteError`` so the
HTTP surface and the bench CLI can map failures without catching bare
``Exception``. Subclasses also inherit from the matching builtin so callers
that only know about ``ValueError`` / ``RuntimeError`` keep working.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    import numpy as np


def _restore(cls: type, args: tuple, state: dict) -> HteError:
    error = cls.__new__(cls)
    error.args = args
    error.__dict__.update(state)
    return error


class HteError(Exception):
    """Base class for all library errors."""

    def __reduce__(self):
        # default pickling re-calls __init__ with positional args only
        return (_restore, (type(self), self.args, self.__dict__))


class PanelError(HteError, ValueError):
    """Malformed or invalid panel data (ingestion or validation)."""


class ConfigError(HteError, ValueError):
    """Invalid settings, unknown method names, bad scenario files."""


class RegressionError(HteError, ValueError):
    """A regression or propensity fit cannot be carried out."""


class FoldError(HteError, ValueError):
    """Sample splitting or temporal cross-validation is infeasible."""


class NonConvergence(HteError, RuntimeError):
    """The weight solver did not reach tolerance within its iteration budget.

    Carries the best iterate seen so callers can inspect or fall back on it.
    """

    def __init__(
        self,
        message: str,
        *,
        best_weights: np.ndarray,
        best_intercept: float,
        gap: float,
        iterations: int,
        unit_id: object | None = None,
    ) -> None:
        super().__init__(message)
        self.best_weights = best_weights
        self.best_intercept = best_intercept
        self.gap = gap
        self.iterations = iterations
        self.unit_id = unit_id

    def for_unit(self, unit_id: object) -> NonConvergence:
        """Return a copy tagged with the target unit's id."""
        return NonConvergence(
            f"Unit {unit_id!r}: {self}",
            best_weights=self.best_weights,
            best_intercept=self.best_intercept,
            gap=self.gap,
            iterations=self.iterations,
            unit_id=unit_id,
        )


class StepError(HteError):
    """A learner step failed; ``step`` names where (e.g. ``"h1sl step 1"``)."""

    def __init__(self, step: str, cause: Exception) -> None:
        super().__init__(f"{step} failed: {cause}")
        self.step = step
        self.cause = cause
