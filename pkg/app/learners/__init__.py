"""Heterogeneous treatment effect learners for panel data."""

from app.learners.baselines import did_hte, r_learner_lite, s_learner, t_learner, x_learner
from app.learners.effects import ImputedEffects, impute_effects
from app.learners.estimate import HteEstimate
from app.learners.registry import (
    METHOD_REGISTRY,
    EstimatorContext,
    parse_methods,
    resolve_method,
    run_method,
)
from app.learners.synthetic import dr_h2sl, h1sl, h2sl, pseudo_outcome

__all__ = [
    "METHOD_REGISTRY",
    "EstimatorContext",
    "HteEstimate",
    "ImputedEffects",
    "did_hte",
    "dr_h2sl",
    "h1sl",
    "h2sl",
    "impute_effects",
    "parse_methods",
    "pseudo_outcome",
    "r_learner_lite",
    "resolve_method",
    "run_method",
    "s_learner",
    "t_learner",
    "x_learner",
]
