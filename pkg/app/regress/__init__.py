"""Regressor registry: name-based lookup for the effect-regression backends.

Backends are classes decorated with ``@register``; each exposes ``kind``,
``fit(spec, X, y) -> state`` and ``predict(state, X) -> ndarray``. Learners
never touch a backend directly: they call ``fit(spec, X, y)`` and get back an
``HteModel`` that knows how to evaluate itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Literal, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.errors import ConfigError, RegressionError

DEFAULT_BANDWIDTH_GRID = (0.1, 0.25, 0.5, 1.0, 2.0)


class RegressorSpec(BaseModel):
    """Which regressor to use and its hyperparameters.

    ``bandwidth=None`` on the kernel smoother selects it by leave-one-group-out
    CV over ``bandwidth_grid``.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["ols", "ridge", "kernel", "knn"] = "ols"
    alpha: float = 1.0
    bandwidth: float | None = None
    bandwidth_grid: tuple[float, ...] = DEFAULT_BANDWIDTH_GRID
    k: int = 5

    @field_validator("alpha")
    @classmethod
    def alpha_nonnegative(cls, v: float) -> float:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"alpha must be >= 0, got {v}")
        return v

    @field_validator("bandwidth")
    @classmethod
    def bandwidth_positive(cls, v: float | None) -> float | None:
        if v is not None and (not math.isfinite(v) or v <= 0):
            raise ValueError(f"bandwidth must be > 0, got {v}")
        return v

    @field_validator("bandwidth_grid")
    @classmethod
    def grid_positive(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v or any(not math.isfinite(h) or h <= 0 for h in v):
            raise ValueError("bandwidth_grid must be a non-empty list of positive values")
        return v

    @field_validator("k")
    @classmethod
    def k_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"k must be >= 1, got {v}")
        return v


class Regressor(Protocol):
    kind: str

    def fit(self, spec: RegressorSpec, X: np.ndarray, y: np.ndarray) -> dict[str, Any]: ...

    def predict(self, state: dict[str, Any], X: np.ndarray) -> np.ndarray: ...


_registry: dict[str, Regressor] = {}


def register(cls: type) -> type:
    """Class decorator: instantiate the backend and file it under ``cls.kind``."""
    _registry[cls.kind] = cls()
    return cls


def resolve_regressor(kind: str) -> Regressor:
    """Look up a backend by kind. Raises ``ConfigError`` if not registered."""
    if kind not in _registry:
        raise ConfigError(
            f"Unknown regressor kind '{kind}'. Available: {list(_registry.keys())}"
        )
    return _registry[kind]


def list_regressors() -> list[str]:
    return list(_registry.keys())


def as_matrix(X: np.ndarray, d: int | None = None) -> np.ndarray:
    """Coerce features to a 2-D float matrix (a 1-D input of length d is one point)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if d is not None and X.size == d else X.reshape(-1, 1)
    if X.ndim != 2:
        raise RegressionError(f"features must be a 2-D matrix, got shape {X.shape}")
    if d is not None and X.shape[1] != d:
        raise RegressionError(f"expected {d} feature columns, got {X.shape[1]}")
    return X


@dataclass(frozen=True, eq=False)
class HteModel:
    """A fitted function x -> tau_hat(x)."""

    spec: RegressorSpec
    state: dict[str, Any]
    d: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.d)
        if not np.all(np.isfinite(X)):
            raise RegressionError("cannot evaluate at non-finite features")
        return resolve_regressor(self.spec.kind).predict(self.state, X)

    __call__ = predict


def fit(spec: RegressorSpec, X: np.ndarray, y: np.ndarray) -> HteModel:
    """Fit the configured regressor on (X, y); pure and deterministic."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] < 1:
        raise RegressionError("cannot fit a regression on zero rows")
    if X.shape[0] != y.size:
        raise RegressionError(f"X has {X.shape[0]} rows but y has {y.size} values")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise RegressionError("regression inputs contain non-finite values")
    state = resolve_regressor(spec.kind).fit(spec, X, y)
    return HteModel(spec=spec, state=state, d=X.shape[1])


# Auto-import backends so the registry is populated on first access.
import app.regress.models as _models  # noqa: E402, F401
