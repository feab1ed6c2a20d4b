"""Propensity score e(x) = P(D = 1 | x) by logistic regression.

Fitted with scikit-learn's unpenalized Newton-Cholesky solver; predictions
are clipped to [clip, 1 - clip] so downstream inverse weights stay bounded.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgWarning
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from app.errors import RegressionError
from app.regress import as_matrix

logger = logging.getLogger(__name__)

DEFAULT_CLIP = 0.01


@dataclass(frozen=True, eq=False)
class PropensityModel:
    intercept: float
    coefficients: np.ndarray
    clip: float = DEFAULT_CLIP
    converged: bool = True
    separated: bool = False
    iterations: int = 0

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + as_matrix(X, self.coefficients.size) @ self.coefficients

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.clip(expit(self.linear_predictor(X)), self.clip, 1.0 - self.clip)

    __call__ = predict


@dataclass(frozen=True)
class ConstantPropensity:
    """e(x) fixed to one value; used to pin the H2SL combination weights."""

    value: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(np.asarray(X, dtype=float)).shape[0], self.value)

    __call__ = predict


def fit_propensity(
    X: np.ndarray,
    D: np.ndarray,
    clip: float = DEFAULT_CLIP,
    max_iters: int = 100,
    tol: float = 1e-10,
) -> PropensityModel:
    """Unpenalized logistic regression of D on X with intercept.

    ``tol`` bounds the largest absolute entry of the log-likelihood gradient.
    Perfectly separated data drive the coefficients toward infinity; the last
    iterate is still returned, with ``separated=True``.
    """
    if not 0 <= clip < 0.5:
        raise RegressionError(f"propensity clip must lie in [0, 0.5), got {clip}")
    X = as_matrix(X)
    d = np.asarray(D, dtype=float).reshape(-1)
    if d.size != X.shape[0]:
        raise RegressionError(f"X has {X.shape[0]} rows but D has {d.size} values")
    if d.min() == d.max():
        raise RegressionError(
            "single-class treatment vector: propensity needs both treated and control units"
        )

    estimator = LogisticRegression(penalty=None, solver="newton-cholesky", tol=tol, max_iter=max_iters)
    with warnings.catch_warnings():
        # non-convergence and singular Hessians are reported through the model flags
        warnings.simplefilter("ignore", ConvergenceWarning)
        warnings.simplefilter("ignore", LinAlgWarning)
        estimator.fit(X, d.astype(int))
    iterations = int(np.max(estimator.n_iter_))
    converged = iterations < max_iters
    model = PropensityModel(
        intercept=float(estimator.intercept_[0]),
        coefficients=np.asarray(estimator.coef_[0], dtype=float),
        clip=clip,
        converged=converged,
        iterations=iterations,
    )

    eta = model.linear_predictor(X)
    separated = bool(eta[d == 1].min() > eta[d == 0].max())
    if separated:
        logger.warning(
            f"Propensity: classes perfectly separated (|beta|={np.linalg.norm(model.coefficients):.2e}); "
            f"predictions rely on clipping at {clip}"
        )
    elif not converged:
        logger.warning(f"Propensity: logistic fit did not converge in {max_iters} iterations")
    return replace(model, separated=separated)
