"""Regression backends: OLS, ridge, Nadaraya-Watson kernel smoother, k-nearest neighbours.

The linear backends and k-NN wrap scikit-learn estimators; the kernel smoother
stays here because its bandwidth CV holds out whole units. All fit with an
intercept (or are intercept-free smoothers), so a constant response is
reproduced exactly at the training points.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.linear_model import LinearRegression
from sklearn.linear_model import Ridge as RidgeRegression
from sklearn.neighbors import KNeighborsRegressor

from app.errors import RegressionError
from app.regress import RegressorSpec, register

logger = logging.getLogger(__name__)


def _linear_state(estimator: LinearRegression | RidgeRegression) -> dict[str, Any]:
    return {"intercept": float(estimator.intercept_), "coef": np.asarray(estimator.coef_, dtype=float)}


def _linear_predict(state: dict[str, Any], X: np.ndarray) -> np.ndarray:
    return state["intercept"] + X @ state["coef"]


@register
class OrdinaryLeastSquares:
    kind = "ols"

    def fit(self, spec: RegressorSpec, X: np.ndarray, y: np.ndarray) -> dict[str, Any]:
        design = np.column_stack([np.ones(X.shape[0]), X])
        rank = np.linalg.matrix_rank(design)
        if rank < design.shape[1]:
            raise RegressionError(
                f"rank-deficient OLS design (rank {rank} < {design.shape[1]} columns, "
                f"{X.shape[0]} rows); use regressor kind 'ridge' with alpha > 0"
            )
        return _linear_state(LinearRegression().fit(X, y))

    predict = staticmethod(_linear_predict)


@register
class Ridge:
    kind = "ridge"

    def fit(self, spec: RegressorSpec, X: np.ndarray, y: np.ndarray) -> dict[str, Any]:
        if spec.alpha == 0:
            return OrdinaryLeastSquares().fit(spec, X, y)
        return _linear_state(RidgeRegression(alpha=spec.alpha, solver="cholesky").fit(X, y))

    predict = staticmethod(_linear_predict)


def _nadaraya_watson(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_query: np.ndarray,
    bandwidth: float,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Gaussian-kernel weighted means; ``exclude`` masks (query, train) pairs out."""
    logw = -cdist(X_query, X_train, "sqeuclidean") / (2.0 * bandwidth**2)
    if exclude is not None:
        logw = np.where(exclude, -np.inf, logw)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return (w @ y_train) / w.sum(axis=1)


def _select_bandwidth(X: np.ndarray, y: np.ndarray, grid: tuple[float, ...]) -> float:
    """Leave-one-group-out CV; a group is every row sharing one feature vector.

    Pooled effect regressions repeat each unit's features once per period, so
    plain leave-one-out would keep the held-out unit's copies in the fit.
    """
    groups, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    if groups.shape[0] < 2:
        return max(grid)
    exclude = inverse[None, :] == np.arange(groups.shape[0])[:, None]
    scores = []
    for h in grid:
        pred = _nadaraya_watson(X, y, groups, h, exclude)
        scores.append(float(np.sum((y - pred[inverse]) ** 2)))
    best = min(scores)
    chosen = max(h for h, s in zip(grid, scores) if s == best)
    logger.debug(f"kernel bandwidth CV: scores={dict(zip(grid, scores))}, chosen={chosen}")
    return chosen


@register
class KernelSmoother:
    kind = "kernel"

    def fit(self, spec: RegressorSpec, X: np.ndarray, y: np.ndarray) -> dict[str, Any]:
        bandwidth = spec.bandwidth or _select_bandwidth(X, y, spec.bandwidth_grid)
        return {"X": X.copy(), "y": y.copy(), "bandwidth": float(bandwidth)}

    def predict(self, state: dict[str, Any], X: np.ndarray) -> np.ndarray:
        return _nadaraya_watson(state["X"], state["y"], X, state["bandwidth"])


@register
class KNearest:
    kind = "knn"

    def fit(self, spec: RegressorSpec, X: np.ndarray, y: np.ndarray) -> dict[str, Any]:
        k = min(spec.k, X.shape[0])
        return {"estimator": KNeighborsRegressor(n_neighbors=k).fit(X, y), "k": k}

    def predict(self, state: dict[str, Any], X: np.ndarray) -> np.ndarray:
        return state["estimator"].predict(X)
