"""Synthetic control weight solver and counterfactual imputation."""

from app.solver.impute import impute_control_counterfactuals, impute_treated_counterfactuals
from app.solver.projection import project_l1_ball, project_simplex
from app.solver.weights import (
    ConstraintSpec,
    SolverOpts,
    SyntheticFit,
    TemporalFoldSpec,
    fit_weights,
    select_penalty_cv,
)

__all__ = [
    "ConstraintSpec",
    "SolverOpts",
    "SyntheticFit",
    "TemporalFoldSpec",
    "fit_weights",
    "impute_control_counterfactuals",
    "impute_treated_counterfactuals",
    "project_l1_ball",
    "project_simplex",
    "select_penalty_cv",
]
