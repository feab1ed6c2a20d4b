"""Imputed individual treatment effects for one side of the panel.

Treated side (superscript 0):  delta[i, t] = Y[i, t] - Y_hat[i, t](0)
Control side (superscript 1):  delta[j, t] = Y_hat[j, t](1) - Y[j, t]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.panel.dataset import PanelDataset, UnitSide
from app.solver.impute import impute_control_counterfactuals, impute_treated_counterfactuals
from app.solver.weights import ConstraintSpec, SolverOpts, SyntheticFit


@dataclass(frozen=True, eq=False)
class ImputedEffects:
    side: UnitSide
    values: np.ndarray                  # units on this side x T1
    source_fits: tuple[SyntheticFit, ...]
    rows: np.ndarray                    # dataset rows, aligned with values

    def recompute(self, dataset: PanelDataset) -> np.ndarray:
        """Rebuild the effects from the stored fits and the dataset."""
        donors = dataset.rows(
            UnitSide.CONTROL if self.side is UnitSide.TREATED else UnitSide.TREATED
        )
        synthetic = np.vstack([f.predict(dataset.post_outcomes[donors]) for f in self.source_fits])
        observed = dataset.post_outcomes[self.rows]
        return observed - synthetic if self.side is UnitSide.TREATED else synthetic - observed

    def pre_rmse_summary(self) -> dict[str, float]:
        rmse = np.array([f.pre_rmse for f in self.source_fits])
        return {"pre_rmse_mean": float(rmse.mean()), "pre_rmse_max": float(rmse.max())}


def impute_effects(
    dataset: PanelDataset,
    side: UnitSide,
    constraint: ConstraintSpec | None = None,
    opts: SolverOpts | None = None,
    n_jobs: int = 1,
) -> ImputedEffects:
    if side is UnitSide.TREATED:
        fits, synthetic = impute_control_counterfactuals(dataset, constraint, opts, n_jobs)
        rows = dataset.treated_idx
        values = dataset.post_outcomes[rows] - synthetic
    else:
        fits, synthetic = impute_treated_counterfactuals(dataset, constraint, opts, n_jobs)
        rows = dataset.control_idx
        values = synthetic - dataset.post_outcomes[rows]
    return ImputedEffects(side=side, values=values, source_fits=tuple(fits), rows=rows)
