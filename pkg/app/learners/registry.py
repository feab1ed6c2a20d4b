"""Method registry: the estimators the CLI, HTTP surface and bench can run.

The only place where method names are bound to learner functions. Config
files, CLI flags and HTTP paths reference methods by these names.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

from app.errors import ConfigError
from app.learners.baselines import did_hte, r_learner_lite, s_learner, t_learner, x_learner
from app.learners.estimate import HteEstimate
from app.learners.synthetic import Pooling, TimeMode, dr_h2sl, h1sl, h2sl
from app.panel.dataset import PanelDataset
from app.regress import RegressorSpec
from app.regress.propensity import DEFAULT_CLIP
from app.solver.weights import ConstraintSpec, SolverOpts


@dataclass(frozen=True)
class EstimatorContext:
    """Everything a learner needs besides the data."""

    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)
    solver: SolverOpts = field(default_factory=SolverOpts)
    clip: float = DEFAULT_CLIP
    pooling: Pooling = "pooled"
    dr_crossfit: bool = True
    dr_time_mode: TimeMode = "last"
    seed: int = 0
    n_jobs: int = 1


@dataclass(frozen=True)
class MethodDefinition:
    name: str
    description: str
    family: Literal["synthetic", "baseline"]
    runner: Callable[[PanelDataset, EstimatorContext], HteEstimate]


METHOD_REGISTRY: dict[str, MethodDefinition] = {
    "h1sl": MethodDefinition(
        name="h1sl",
        description="One-side synthetic learner: SC-imputed Y(0) for treated units, effects regressed on x.",
        family="synthetic",
        runner=lambda ds, ctx: h1sl(
            ds, ctx.regressor, ctx.constraint, opts=ctx.solver, pooling=ctx.pooling, n_jobs=ctx.n_jobs
        ),
    ),
    "h2sl": MethodDefinition(
        name="h2sl",
        description="Two-side synthetic learner: both sides imputed, combined with propensity weights.",
        family="synthetic",
        runner=lambda ds, ctx: h2sl(
            ds,
            ctx.regressor,
            ctx.constraint,
            opts=ctx.solver,
            pooling=ctx.pooling,
            clip=ctx.clip,
            n_jobs=ctx.n_jobs,
        ),
    ),
    "dr": MethodDefinition(
        name="dr",
        description="Doubly robust two-side learner with unit sample splitting and cross-fitting.",
        family="synthetic",
        runner=lambda ds, ctx: dr_h2sl(
            ds,
            ctx.regressor,
            ctx.constraint,
            2,
            ctx.dr_crossfit,
            opts=ctx.solver,
            seed=ctx.seed,
            time_mode=ctx.dr_time_mode,
            clip=ctx.clip,
            n_jobs=ctx.n_jobs,
        ),
    ),
    "s": MethodDefinition(
        name="s",
        description="S-learner on pooled post-period rows.",
        family="baseline",
        runner=lambda ds, ctx: s_learner(ds, ctx.regressor),
    ),
    "t": MethodDefinition(
        name="t",
        description="T-learner on pooled post-period rows.",
        family="baseline",
        runner=lambda ds, ctx: t_learner(ds, ctx.regressor),
    ),
    "x": MethodDefinition(
        name="x",
        description="X-learner on pooled post-period rows.",
        family="baseline",
        runner=lambda ds, ctx: x_learner(ds, ctx.regressor, clip=ctx.clip),
    ),
    "rlite": MethodDefinition(
        name="rlite",
        description="Residual (Robinson) learner with a linear effect model, no cross-fitting.",
        family="baseline",
        runner=lambda ds, ctx: r_learner_lite(ds, ctx.regressor, clip=ctx.clip),
    ),
    "did": MethodDefinition(
        name="did",
        description="Difference-in-differences contrasts regressed on x (simplified panel DiD).",
        family="baseline",
        runner=lambda ds, ctx: did_hte(ds, ctx.regressor),
    ),
}


def resolve_method(name: str) -> MethodDefinition:
    """Look up a method by name. Raises ``ConfigError`` if not found."""
    if name not in METHOD_REGISTRY:
        raise ConfigError(
            f"Unknown method '{name}'. Available: {list(METHOD_REGISTRY.keys())}"
        )
    return METHOD_REGISTRY[name]


def parse_methods(spec: str | list[str]) -> list[str]:
    """Split a comma list (``"h1sl,h2sl,x"``) and check every name up front."""
    names = [n.strip() for n in spec.split(",")] if isinstance(spec, str) else list(spec)
    names = [n for n in names if n]
    if not names:
        raise ConfigError("No methods given")
    for name in names:
        resolve_method(name)
    return names


def run_method(name: str, dataset: PanelDataset, context: EstimatorContext | None = None) -> HteEstimate:
    return resolve_method(name).runner(dataset, context or EstimatorContext())
