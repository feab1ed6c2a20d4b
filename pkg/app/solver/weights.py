"""Restricted least-squares weights for the synthetic control step.

Solves, for one target unit,

    min_{mu, w}  sum_{t <= t0} (y_t - mu - sum_j w_j Y_jt)^2  [+ lam * sum_j w_j dist_j]

over one of three feasible sets: the L1 ball ||w||_1 <= K, the probability
simplex, or the simplex with a per-donor distance penalty. The intercept is
profiled out by centering, so the iterative part only ever sees w.

The optimizer is projected gradient descent with step 1/L, L the Lipschitz
constant of the quadratic (twice the top eigenvalue of the centered donor Gram
matrix, by power iteration). ``SolverOpts.accelerate`` adds Nesterov momentum
with a monotone safeguard and adaptive restart; the objective trace is
non-increasing either way.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from app.errors import FoldError, NonConvergence
from app.solver.projection import project_l1_ball, project_simplex

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8
_MAX_BACKTRACKS = 60


class ConstraintSpec(BaseModel):
    """Feasible set for the donor weights, plus the intercept switch.

    ``lam=None`` on the penalized simplex means "choose by temporal CV over
    ``lambda_grid``". ``pairwise_distances=None`` derives one distance per
    donor from the pre-period trajectories (squared Euclidean).
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["l1ball", "simplex", "penalized_simplex"] = "l1ball"
    radius: float = 1.0
    lam: float | None = 0.0
    lambda_grid: tuple[float, ...] = (0.0, 0.01, 0.1, 1.0, 10.0)
    pairwise_distances: tuple[float, ...] | None = None
    intercept: bool = True

    @field_validator("radius")
    @classmethod
    def radius_positive(cls, v: float) -> float:
        if not math.isfinite(v) or v <= 0:
            raise ValueError(f"radius must be finite and positive, got {v}")
        return v

    @field_validator("lam")
    @classmethod
    def lam_nonnegative(cls, v: float | None) -> float | None:
        if v is not None and (not math.isfinite(v) or v < 0):
            raise ValueError(f"lam must be >= 0, got {v}")
        return v

    @field_validator("lambda_grid")
    @classmethod
    def grid_valid(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v or any(not math.isfinite(x) or x < 0 for x in v):
            raise ValueError("lambda_grid must be a non-empty list of values >= 0")
        return v

    @field_validator("pairwise_distances")
    @classmethod
    def distances_nonnegative(cls, v: tuple[float, ...] | None) -> tuple[float, ...] | None:
        if v is not None and any(not math.isfinite(x) or x < 0 for x in v):
            raise ValueError("pairwise_distances must all be finite and >= 0")
        return v

    @model_validator(mode="after")
    def penalty_only_on_penalized(self) -> ConstraintSpec:
        if self.kind != "penalized_simplex" and self.pairwise_distances is not None:
            raise ValueError("pairwise_distances only apply to kind 'penalized_simplex'")
        return self

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "l1ball":
            return project_l1_ball(v, self.radius)
        return project_simplex(v)

    def is_feasible(self, w: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        if self.kind == "l1ball":
            return bool(np.abs(w).sum() <= self.radius + tol)
        return bool(np.all(w >= -1e-12) and abs(w.sum() - 1.0) <= tol)


@dataclass(frozen=True)
class SolverOpts:
    tol: float = 1e-10          # relative objective decrease
    max_iters: int = 50_000
    accelerate: bool = True
    power_iters: int = 200
    # objective floor, as a fraction of the target's centered sum of squares;
    # a fit that stops short of ``tol`` is still accepted at or below it
    atol: float = 1e-7


@dataclass(frozen=True, eq=False)
class SyntheticFit:
    weights: np.ndarray
    intercept: float
    constraint: ConstraintSpec
    pre_rmse: float
    iterations: int
    objective: float
    lam: float = 0.0
    converged: bool = True
    trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def predict(self, donor_outcomes: np.ndarray) -> np.ndarray:
        """Synthetic outcomes from a (donors x periods) block."""
        return self.intercept + self.weights @ np.asarray(donor_outcomes, dtype=float)

    def satisfies_constraint(self, tol: float = FEASIBILITY_TOL) -> bool:
        return self.constraint.is_feasible(self.weights, tol)


@dataclass(frozen=True)
class TemporalFoldSpec:
    """Rolling-origin folds over the pre-period.

    Each fold trains on an initial segment and validates on the ``h`` periods
    that follow it, h = (t0 - min_train) // n_folds.
    """

    n_folds: int = 2
    min_train: int = 2


def _top_eigenvalue(gram: np.ndarray, iters: int) -> float:
    """Largest eigenvalue of a PSD matrix by power iteration."""
    if not np.any(gram):
        return 0.0
    v = np.full(gram.shape[0], 1.0 / math.sqrt(gram.shape[0]))
    value = 0.0
    for _ in range(iters):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # start vector orthogonal to the range; fall back to a diagonal bound
            return float(np.max(np.diag(gram)))
        v = w / norm
        if abs(norm - value) <= 1e-12 * norm:
            value = norm
            break
        value = norm
    return value


def _minimize(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    w0: np.ndarray,
    lipschitz: float,
    opts: SolverOpts,
) -> tuple[np.ndarray, float, int, list[float], bool, float]:
    """Monotone projected gradient; returns (w, f, iterations, trace, converged, gap).

    ``converged`` is True only when the relative-decrease rule fired. Running
    out of iterations or of step halvings returns False with the last observed
    gap; the caller decides whether the objective floor still certifies the fit.
    """
    x = w0
    fx = objective(x)
    trace = [fx]
    y, t = x, 1.0
    step = 1.0 / lipschitz
    backtracks = 0
    gap = math.inf

    for it in range(1, opts.max_iters + 1):
        plain = y is x
        z = project(y - step * gradient(y))
        fz = objective(z)

        if fz <= fx:
            gap = (fx - fz) / fx if fx > 0 else 0.0
            if opts.accelerate:
                t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
                y = z + ((t - 1.0) / t_next) * (z - x)
                t = t_next
            else:
                y = z
            x, fx = z, fz
            trace.append(fx)
            if gap <= opts.tol:
                if plain or not opts.accelerate:
                    return x, fx, it, trace, True, gap
                y, t = x, 1.0
            continue

        if not plain:
            # momentum overshoot: restart from the incumbent
            y, t = x, 1.0
            continue

        # a plain step from x went uphill: step too long for the estimated L
        backtracks += 1
        if backtracks > _MAX_BACKTRACKS:
            logger.warning(
                f"Weight solver: step size collapsed after {_MAX_BACKTRACKS} halvings at "
                f"iteration {it} (objective {fx:.3e}, last relative decrease {gap:.3e})"
            )
            return x, fx, it, trace, False, gap
        step /= 2.0

    return x, fx, opts.max_iters, trace, False, gap


def _penalty_distances(y: np.ndarray, donors: np.ndarray, spec: ConstraintSpec) -> np.ndarray:
    if spec.pairwise_distances is not None:
        dist = np.asarray(spec.pairwise_distances, dtype=float)
        if dist.shape != (donors.shape[1],):
            raise ValueError(
                f"pairwise_distances has {dist.size} entries for {donors.shape[1]} donors"
            )
        return dist
    return np.sum((donors - y[:, None]) ** 2, axis=0)


def fit_weights(
    target_pre: np.ndarray,
    donors_pre: np.ndarray,
    spec: ConstraintSpec | None = None,
    opts: SolverOpts | None = None,
) -> SyntheticFit:
    """Fit synthetic control weights for one target.

    ``target_pre`` has length t0; ``donors_pre`` is t0 x J (one column per donor).
    Raises ``NonConvergence`` if tolerance is not met within ``opts.max_iters``
    and the objective is still above ``opts.atol`` times the target's centered
    sum of squares.
    """
    spec = spec or ConstraintSpec()
    opts = opts or SolverOpts()
    y = np.asarray(target_pre, dtype=float).reshape(-1)
    a = np.asarray(donors_pre, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if y.size < 1 or a.shape[0] != y.size or a.shape[1] < 1:
        raise ValueError(
            f"fit_weights: target has {y.size} periods, donors block has shape {a.shape}"
        )
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a))):
        raise ValueError("fit_weights: inputs contain non-finite values")

    lam = 0.0
    penalty = np.zeros(a.shape[1])
    if spec.kind == "penalized_simplex":
        lam = spec.lam
        if lam is None:
            lam = select_penalty_cv(y, a, spec.lambda_grid, TemporalFoldSpec(), spec, opts)
        penalty = lam * _penalty_distances(y, a, spec)

    if spec.intercept:
        y_mean, a_mean = float(y.mean()), a.mean(axis=0)
        yc, ac = y - y_mean, a - a_mean
    else:
        y_mean, a_mean = 0.0, np.zeros(a.shape[1])
        yc, ac = y, a

    def objective(w: np.ndarray) -> float:
        r = yc - ac @ w
        return float(r @ r + penalty @ w)

    def gradient(w: np.ndarray) -> np.ndarray:
        return -2.0 * (ac.T @ (yc - ac @ w)) + penalty

    lipschitz = 2.0 * _top_eigenvalue(ac.T @ ac, opts.power_iters)
    if lipschitz <= 1e-300:
        lipschitz = 1.0

    j = a.shape[1]
    w0 = np.zeros(j) if spec.kind == "l1ball" else np.full(j, 1.0 / j)
    w, f, iterations, trace, converged, gap = _minimize(
        objective, gradient, spec.project, w0, lipschitz, opts
    )
    intercept = y_mean - float(a_mean @ w) if spec.intercept else 0.0

    if not converged:
        # f >= 0 on the feasible set, so f bounds its distance to the optimum
        floor = opts.atol * max(float(yc @ yc), 1.0)
        if f > floor:
            raise NonConvergence(
                f"Weight solver did not converge in {iterations} iterations "
                f"(objective at best iterate {f:.3e} above floor {floor:.3e}, "
                f"last relative decrease {gap:.3e}, tol {opts.tol:.1e})",
                best_weights=w,
                best_intercept=intercept,
                gap=gap,
                iterations=iterations,
            )
        logger.debug(
            f"fit_weights: relative decrease stalled at {gap:.3e} after {iterations} iterations; "
            f"accepting objective {f:.3e} <= floor {floor:.3e}"
        )

    residual = y - intercept - a @ w
    logger.debug(
        f"fit_weights: kind={spec.kind}, J={j}, t0={y.size}, iterations={iterations}, "
        f"objective={f:.3e}"
    )
    return SyntheticFit(
        weights=w,
        intercept=intercept,
        constraint=spec,
        pre_rmse=float(np.sqrt(np.mean(residual**2))),
        iterations=iterations,
        objective=f,
        lam=float(lam),
        converged=True,
        trace=np.asarray(trace),
    )


def select_penalty_cv(
    target_pre: np.ndarray,
    donors_pre: np.ndarray,
    lambdas: Sequence[float],
    folds: TemporalFoldSpec | None = None,
    spec: ConstraintSpec | None = None,
    opts: SolverOpts | None = None,
) -> float:
    """Choose the penalty by rolling-origin CV on the pre-period.

    Returns the lambda with the smallest mean held-out squared error; exact
    ties go to the larger lambda.
    """
    folds = folds or TemporalFoldSpec()
    spec = spec or ConstraintSpec(kind="penalized_simplex")
    lambdas = [float(v) for v in lambdas]
    if not lambdas or any(v < 0 for v in lambdas):
        raise ValueError("select_penalty_cv: lambdas must be a non-empty list of values >= 0")

    y = np.asarray(target_pre, dtype=float).reshape(-1)
    a = np.asarray(donors_pre, dtype=float).reshape(y.size, -1)
    t0 = y.size
    horizon = (t0 - folds.min_train) // folds.n_folds if folds.n_folds > 0 else 0
    if t0 < 4 or horizon < 1:
        raise FoldError(
            f"insufficient pre-period for CV (t0={t0}, n_folds={folds.n_folds}, "
            f"min_train={folds.min_train})"
        )

    scores: list[float] = []
    for lam in lambdas:
        fold_spec = spec.model_copy(update={"lam": lam})
        errors = []
        for k in range(folds.n_folds):
            end = t0 - (folds.n_folds - k) * horizon
            fit = fit_weights(y[:end], a[:end], fold_spec, opts)
            held_out = y[end : end + horizon] - fit.predict(a[end : end + horizon].T)
            errors.append(float(np.mean(held_out**2)))
        scores.append(float(np.mean(errors)))

    best = min(scores)
    chosen = max(lam for lam, score in zip(lambdas, scores) if score == best)
    logger.debug(f"select_penalty_cv: scores={dict(zip(lambdas, scores))}, chosen={chosen}")
    return chosen
