"""Comparison learners that ignore the synthetic-control structure.

The S-, T-, X- and residual learners pool every (unit, post-period)
observation as an i.i.d. row. ``did_hte`` works on per-unit before/after
contrasts instead, a two-way fixed-effects style surrogate for panel DiD.
All use the same regression backends as the synthetic learners.
"""

from __future__ import annotations

import numpy as np

from app.errors import RegressionError
from app.learners.estimate import (
    DifferenceModel,
    HteEstimate,
    LinearEffectModel,
    PropensityWeightedModel,
    TreatmentContrastModel,
)
from app.panel.dataset import PanelDataset, require_valid
from app.regress import RegressorSpec, fit
from app.regress.propensity import DEFAULT_CLIP, fit_propensity


def _pooled_post(dataset: PanelDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X, D, Y) with one row per (unit, post period), unit-major."""
    t1 = dataset.t1
    X = np.repeat(dataset.features, t1, axis=0)
    d = np.repeat(dataset.treated_mask, t1)
    y = dataset.post_outcomes.reshape(-1)
    return X, d, y


def s_learner(dataset: PanelDataset, spec: RegressorSpec | None = None, **_: object) -> HteEstimate:
    """One outcome model on [x, D]; tau(x) = mu(x, 1) - mu(x, 0)."""
    spec = spec or RegressorSpec()
    require_valid(dataset)
    X, d, y = _pooled_post(dataset)
    outcome = fit(spec, np.column_stack([X, d.astype(float)]), y)
    return HteEstimate(method="s", model=TreatmentContrastModel(outcome_model=outcome, d=X.shape[1]))


def t_learner(dataset: PanelDataset, spec: RegressorSpec | None = None, **_: object) -> HteEstimate:
    """Separate outcome models per arm; tau(x) = mu_1(x) - mu_0(x)."""
    spec = spec or RegressorSpec()
    require_valid(dataset)
    X, d, y = _pooled_post(dataset)
    mu_1 = fit(spec, X[d], y[d])
    mu_0 = fit(spec, X[~d], y[~d])
    return HteEstimate(method="t", model=DifferenceModel(plus=mu_1, minus=mu_0))


def x_learner(
    dataset: PanelDataset,
    spec: RegressorSpec | None = None,
    clip: float = DEFAULT_CLIP,
    **_: object,
) -> HteEstimate:
    """Cross-imputed effects per arm, combined with the propensity as in H2SL."""
    spec = spec or RegressorSpec()
    require_valid(dataset)
    X, d, y = _pooled_post(dataset)
    mu_1 = fit(spec, X[d], y[d])
    mu_0 = fit(spec, X[~d], y[~d])
    tau_treated = fit(spec, X[d], y[d] - mu_0.predict(X[d]))
    tau_control = fit(spec, X[~d], mu_1.predict(X[~d]) - y[~d])
    e_hat = fit_propensity(dataset.features, dataset.treated_mask, clip)
    return HteEstimate(
        method="x",
        model=PropensityWeightedModel(
            treated_model=tau_treated, control_model=tau_control, propensity=e_hat
        ),
        diagnostics={"propensity_separated": e_hat.separated},
    )


def r_learner_lite(
    dataset: PanelDataset,
    spec: RegressorSpec | None = None,
    clip: float = DEFAULT_CLIP,
    **_: object,
) -> HteEstimate:
    """Robinson residualisation with a linear effect model.

    Residualise Y on x with the configured regressor and D on x with the
    propensity model, then least squares of the outcome residual on the
    treatment residual interacted with [1, x].
    """
    spec = spec or RegressorSpec()
    require_valid(dataset)
    X, d, y = _pooled_post(dataset)
    m_hat = fit(spec, X, y)
    e_hat = fit_propensity(dataset.features, dataset.treated_mask, clip)

    y_res = y - m_hat.predict(X)
    d_res = d.astype(float) - e_hat.predict(X)
    design = d_res[:, None] * np.column_stack([np.ones(X.shape[0]), X])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RegressionError(
            f"rank-deficient residual design (rank {rank} < {design.shape[1]} columns)"
        )
    theta, *_ = np.linalg.lstsq(design, y_res, rcond=None)
    return HteEstimate(
        method="rlite",
        model=LinearEffectModel(intercept=float(theta[0]), coef=theta[1:]),
        diagnostics={"propensity_separated": e_hat.separated},
    )


def did_hte(dataset: PanelDataset, spec: RegressorSpec | None = None, **_: object) -> HteEstimate:
    """Per-unit (post mean - pre mean) contrasts, net of the controls' trend at x."""
    spec = spec or RegressorSpec()
    require_valid(dataset)
    contrast = dataset.post_outcomes.mean(axis=1) - dataset.pre_outcomes.mean(axis=1)
    treated, control = dataset.treated_idx, dataset.control_idx
    trend = fit(spec, dataset.features[control], contrast[control])
    target = contrast[treated] - trend.predict(dataset.features[treated])
    return HteEstimate(method="did", model=fit(spec, dataset.features[treated], target))
