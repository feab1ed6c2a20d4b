"""Fitted effect functions and the estimate record every learner returns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np

from app.regress import as_matrix


class EffectFunction(Protocol):
    def predict(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class PropensityWeightedModel:
    """tau(x) = e(x) * treated_model(x) + (1 - e(x)) * control_model(x)."""

    treated_model: EffectFunction
    control_model: EffectFunction
    propensity: EffectFunction

    def predict(self, X: np.ndarray) -> np.ndarray:
        e = self.propensity.predict(X)
        return e * self.treated_model.predict(X) + (1.0 - e) * self.control_model.predict(X)


@dataclass(frozen=True, eq=False)
class DifferenceModel:
    """tau(x) = plus(x) - minus(x)."""

    plus: EffectFunction
    minus: EffectFunction

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.plus.predict(X) - self.minus.predict(X)


@dataclass(frozen=True, eq=False)
class TreatmentContrastModel:
    """tau(x) = mu(x, 1) - mu(x, 0) for an outcome model fit on [x, D]."""

    outcome_model: EffectFunction
    d: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.d)
        ones, zeros = np.ones((X.shape[0], 1)), np.zeros((X.shape[0], 1))
        return self.outcome_model.predict(np.hstack([X, ones])) - self.outcome_model.predict(
            np.hstack([X, zeros])
        )


@dataclass(frozen=True, eq=False)
class LinearEffectModel:
    intercept: float
    coef: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + as_matrix(X, self.coef.size) @ self.coef


@dataclass(frozen=True, eq=False)
class AveragedModel:
    """Pointwise mean of several fitted functions (cross-fitting)."""

    models: tuple[EffectFunction, ...]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([m.predict(X) for m in self.models], axis=0)


@dataclass(frozen=True, eq=False)
class HteEstimate:
    """A learner's output: the fitted tau_hat plus fit diagnostics."""

    method: str
    model: EffectFunction
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.model.predict(X), dtype=float)
