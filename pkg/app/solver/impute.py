"""Counterfactual imputation for either side of the panel.

Control side of the treated units: fit each treated unit on the controls'
pre-period outcomes, predict Y(0) after t0 from the controls' post outcomes.
Treated side of the control units: the mirror image, fit each control unit on
the treated units and predict Y(1) from their observed post outcomes.
"""

from __future__ import annotations

import logging

import numpy as np
from joblib import Parallel, delayed

from app.errors import NonConvergence
from app.panel.dataset import PanelDataset, UnitSide, require_valid
from app.solver.weights import ConstraintSpec, SolverOpts, SyntheticFit, fit_weights

logger = logging.getLogger(__name__)


def _fit_one(
    unit_id: object,
    target_pre: np.ndarray,
    donors_pre: np.ndarray,
    spec: ConstraintSpec,
    opts: SolverOpts,
) -> SyntheticFit:
    try:
        return fit_weights(target_pre, donors_pre, spec, opts)
    except NonConvergence as e:
        raise e.for_unit(unit_id) from e


def _impute(
    dataset: PanelDataset,
    target_side: UnitSide,
    spec: ConstraintSpec,
    opts: SolverOpts,
    n_jobs: int,
) -> tuple[list[SyntheticFit], np.ndarray]:
    require_valid(dataset)
    targets = dataset.rows(target_side)
    donor_side = UnitSide.CONTROL if target_side is UnitSide.TREATED else UnitSide.TREATED
    donors = dataset.rows(donor_side)

    donors_pre = dataset.pre_outcomes[donors].T     # t0 x J
    donors_post = dataset.post_outcomes[donors]     # J x T1

    fits = Parallel(n_jobs=n_jobs)(
        delayed(_fit_one)(
            dataset.unit_ids[row], dataset.pre_outcomes[row], donors_pre, spec, opts
        )
        for row in targets
    )
    imputed = np.vstack([fit.predict(donors_post) for fit in fits])
    logger.debug(
        f"Imputed {target_side.value} side: {len(targets)} targets on {len(donors)} donors, "
        f"max pre_rmse={max(f.pre_rmse for f in fits):.3e}"
    )
    return list(fits), imputed


def impute_control_counterfactuals(
    dataset: PanelDataset,
    spec: ConstraintSpec | None = None,
    opts: SolverOpts | None = None,
    n_jobs: int = 1,
) -> tuple[list[SyntheticFit], np.ndarray]:
    """Y_hat(0) for every treated unit after t0; returns (fits, m x T1 matrix)."""
    return _impute(dataset, UnitSide.TREATED, spec or ConstraintSpec(), opts or SolverOpts(), n_jobs)


def impute_treated_counterfactuals(
    dataset: PanelDataset,
    spec: ConstraintSpec | None = None,
    opts: SolverOpts | None = None,
    n_jobs: int = 1,
) -> tuple[list[SyntheticFit], np.ndarray]:
    """Y_hat(1) for every control unit after t0; returns (fits, n x T1 matrix)."""
    return _impute(dataset, UnitSide.CONTROL, spec or ConstraintSpec(), opts or SolverOpts(), n_jobs)
