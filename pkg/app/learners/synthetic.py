"""Synthetic-control meta-learners: one-side (H1SL), two-side (H2SL), doubly robust.

All three share the same first two steps: fit synthetic control weights on the
pre-period, then turn the post-period gap between observed and synthetic
outcomes into imputed individual effects. They differ in what is regressed on
the unit features afterwards.
"""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from sklearn.model_selection import StratifiedKFold

from app.errors import FoldError, HteError, StepError
from app.learners.effects import ImputedEffects, impute_effects
from app.learners.estimate import AveragedModel, EffectFunction, HteEstimate, PropensityWeightedModel
from app.panel.dataset import PanelDataset, UnitSide, require_valid
from app.regress import HteModel, RegressorSpec, fit
from app.regress.propensity import DEFAULT_CLIP, fit_propensity
from app.solver.weights import ConstraintSpec, SolverOpts

logger = logging.getLogger(__name__)

Pooling = Literal["pooled", "unit_mean"]
TimeMode = Literal["last", "pooled"]


def _step(name: str, fn, *args, **kwargs):
    """Run one learner step, re-raising library errors with step provenance."""
    try:
        return fn(*args, **kwargs)
    except StepError:
        raise
    except HteError as e:
        raise StepError(name, e) from e


def regress_effects(
    dataset: PanelDataset, effects: ImputedEffects, spec: RegressorSpec, pooling: Pooling = "pooled"
) -> HteModel:
    """Regress imputed effects on the features of the units that produced them.

    ``pooled`` repeats each unit's features once per post period;
    ``unit_mean`` regresses the per-unit mean effect instead.
    """
    X = dataset.features[effects.rows]
    if pooling == "pooled":
        return fit(spec, np.repeat(X, effects.values.shape[1], axis=0), effects.values.reshape(-1))
    return fit(spec, X, effects.values.mean(axis=1))


def h1sl(
    dataset: PanelDataset,
    spec: RegressorSpec | None = None,
    constraint: ConstraintSpec | None = None,
    *,
    opts: SolverOpts | None = None,
    pooling: Pooling = "pooled",
    n_jobs: int = 1,
) -> HteEstimate:
    """One-side learner: impute Y(0) for the treated, regress the gaps on X."""
    spec = spec or RegressorSpec()
    require_valid(dataset)
    effects = _step(
        "h1sl step 1", impute_effects, dataset, UnitSide.TREATED, constraint, opts, n_jobs
    )
    model = _step("h1sl step 3", regress_effects, dataset, effects, spec, pooling)
    return HteEstimate(
        method="h1sl",
        model=model,
        diagnostics=effects.pre_rmse_summary() | {"n_fits": len(effects.source_fits)},
    )


def h2sl(
    dataset: PanelDataset,
    spec: RegressorSpec | None = None,
    constraint: ConstraintSpec | None = None,
    *,
    opts: SolverOpts | None = None,
    pooling: Pooling = "pooled",
    propensity: EffectFunction | None = None,
    clip: float = DEFAULT_CLIP,
    n_jobs: int = 1,
) -> HteEstimate:
    """Two-side learner: tau = e * tau_0 + (1 - e) * tau_1.

    tau_0 is fit on the treated units' imputed effects, tau_1 on the control
    units' (whose Y(1) is synthesised from the treated units). ``propensity``
    overrides the fitted e(x).
    """
    spec = spec or RegressorSpec()
    require_valid(dataset)
    treated = _step("h2sl step 1", impute_effects, dataset, UnitSide.TREATED, constraint, opts, n_jobs)
    control = _step("h2sl step 1", impute_effects, dataset, UnitSide.CONTROL, constraint, opts, n_jobs)
    tau_0 = _step("h2sl step 3", regress_effects, dataset, treated, spec, pooling)
    tau_1 = _step("h2sl step 3", regress_effects, dataset, control, spec, pooling)
    if propensity is None:
        propensity = _step(
            "h2sl step 4", fit_propensity, dataset.features, dataset.treated_mask, clip
        )

    diagnostics = {
        "treated_side": treated.pre_rmse_summary(),
        "control_side": control.pre_rmse_summary(),
        "propensity_separated": bool(getattr(propensity, "separated", False)),
    }
    return HteEstimate(
        method="h2sl",
        model=PropensityWeightedModel(treated_model=tau_0, control_model=tau_1, propensity=propensity),
        diagnostics=diagnostics,
    )


def pseudo_outcome(d: np.ndarray, e: np.ndarray, delta: np.ndarray, tau_d: np.ndarray) -> np.ndarray:
    """Doubly robust target: (D - e) / (e (1 - e)) * (delta - tau_D) + tau_D."""
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    tau_d = np.asarray(tau_d, dtype=float)
    return (d - e) / (e * (1.0 - e)) * (np.asarray(delta, dtype=float) - tau_d) + tau_d


def _split_units(treated_mask: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two folds, stratified on treatment so each holds treated and control units."""
    n_treated = int(treated_mask.sum())
    if min(n_treated, treated_mask.size - n_treated) < 2:
        raise FoldError(
            f"could not split {treated_mask.size} units ({n_treated} treated) into two folds "
            f"each holding treated and control units"
        )
    # MT19937 takes the full 64-bit replication seed
    folds = StratifiedKFold(
        n_splits=2, shuffle=True, random_state=np.random.RandomState(np.random.MT19937(seed))
    )
    first, second = (test for _, test in folds.split(np.zeros((treated_mask.size, 1)), treated_mask))
    return first, second


def dr_h2sl(
    dataset: PanelDataset,
    spec: RegressorSpec | None = None,
    constraint: ConstraintSpec | None = None,
    folds: int = 2,
    crossfit: bool = True,
    *,
    opts: SolverOpts | None = None,
    seed: int = 0,
    time_mode: TimeMode = "last",
    clip: float = DEFAULT_CLIP,
    n_jobs: int = 1,
) -> HteEstimate:
    """Two-stage doubly robust learner built on the two-side imputed effects.

    Effects are imputed once on the full panel; only the nuisance fits
    (e, tau_0, tau_1) and the pseudo-outcome regression honour the unit split.
    ``time_mode="last"`` uses the final period only, ``"pooled"`` every post period.
    """
    if folds != 2:
        raise FoldError(f"dr_h2sl supports exactly 2 folds, got {folds}")
    spec = spec or RegressorSpec()
    require_valid(dataset)
    treated = _step("dr step 0", impute_effects, dataset, UnitSide.TREATED, constraint, opts, n_jobs)
    control = _step("dr step 0", impute_effects, dataset, UnitSide.CONTROL, constraint, opts, n_jobs)

    # own-side effect per unit: treated rows carry delta^0, control rows delta^1
    own = np.empty((dataset.n_units, dataset.t1))
    own[treated.rows] = treated.values
    own[control.rows] = control.values
    if time_mode == "last":
        own = own[:, -1:]

    s1, s2 = _split_units(dataset.treated_mask, seed)

    def rows_of(units: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        reps = own.shape[1]
        X = np.repeat(dataset.features[units], reps, axis=0)
        d = np.repeat(dataset.treated_mask[units], reps)
        delta = own[units].reshape(-1)
        return X, d, delta

    def second_stage(train: np.ndarray, evaluate: np.ndarray) -> tuple[HteModel, bool]:
        X, d, delta = rows_of(train)
        e_hat = _step("dr step 1", fit_propensity, dataset.features[train], dataset.treated_mask[train], clip)
        tau_0 = _step("dr step 1", fit, spec, X[d], delta[d])
        tau_1 = _step("dr step 1", fit, spec, X[~d], delta[~d])

        X2, d2, delta2 = rows_of(evaluate)
        tau_d = np.where(d2, tau_0.predict(X2), tau_1.predict(X2))
        phi = pseudo_outcome(d2, e_hat.predict(X2), delta2, tau_d)
        return _step("dr step 2", fit, spec, X2, phi), e_hat.separated

    first, separated_a = second_stage(s1, s2)
    models: list[HteModel] = [first]
    separated = [separated_a]
    if crossfit:
        swapped, separated_b = second_stage(s2, s1)
        models.append(swapped)
        separated.append(separated_b)

    if any(separated):
        logger.warning("dr_h2sl: propensity hit the clip boundary in a fold")
    return HteEstimate(
        method="dr",
        model=AveragedModel(models=tuple(models)) if len(models) > 1 else models[0],
        diagnostics={
            "treated_side": treated.pre_rmse_summary(),
            "control_side": control.pre_rmse_summary(),
            "fold_sizes": [int(s1.size), int(s2.size)],
            "propensity_separated": any(separated),
        },
    )
