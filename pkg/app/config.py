"""Configuration loader: reads config.yaml, validates with Pydantic.

Sections: solver (weight problem), regressor (effect regression), propensity,
learners (pooling, DR options), bench (harness defaults), plus the HTTP
surface's auth/CORS keys. Method names are validated against
learners/registry.py.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.learners.registry import EstimatorContext
from app.regress import DEFAULT_BANDWIDTH_GRID, RegressorSpec
from app.solver.weights import ConstraintSpec, SolverOpts

logger = logging.getLogger(__name__)

_EVAL_ON = re.compile(r"^(all|treated|fresh:[1-9]\d*)$")


class SolverSettings(BaseModel):
    """Weight solver keys (``solver.*``). ``lambda: null`` selects the penalty by CV."""

    model_config = ConfigDict(populate_by_name=True)

    tol: float = 1e-10
    atol: float = 1e-7
    max_iters: int = 50_000
    constraint: Literal["l1ball", "simplex", "penalized_simplex"] = "l1ball"
    radius: float = 1.0
    intercept: bool = True
    lambda_: float | None = Field(default=0.0, alias="lambda")
    lambda_grid: list[float] = [0.0, 0.01, 0.1, 1.0, 10.0]
    accelerate: bool = True
    n_jobs: int = 1

    @field_validator("tol", "atol")
    @classmethod
    def tol_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("solver tolerances must be positive")
        return v

    @field_validator("max_iters", "n_jobs")
    @classmethod
    def positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    def constraint_spec(self) -> ConstraintSpec:
        return ConstraintSpec(
            kind=self.constraint,
            radius=self.radius,
            lam=self.lambda_,
            lambda_grid=tuple(self.lambda_grid),
            intercept=self.intercept,
        )

    def opts(self) -> SolverOpts:
        return SolverOpts(
            tol=self.tol, atol=self.atol, max_iters=self.max_iters, accelerate=self.accelerate
        )


class RegressorSettings(BaseModel):
    """Effect regression keys (``regressor.*``)."""

    kind: Literal["ols", "ridge", "kernel", "knn"] = "ols"
    alpha: float = 1.0
    bandwidth: float | None = None
    bandwidth_grid: list[float] = list(DEFAULT_BANDWIDTH_GRID)
    k: int = 5

    def spec(self) -> RegressorSpec:
        return RegressorSpec(
            kind=self.kind,
            alpha=self.alpha,
            bandwidth=self.bandwidth,
            bandwidth_grid=tuple(self.bandwidth_grid),
            k=self.k,
        )


class PropensitySettings(BaseModel):
    clip: float = 0.01

    @field_validator("clip")
    @classmethod
    def clip_range(cls, v: float) -> float:
        if not 0 <= v < 0.5:
            raise ValueError("propensity.clip must lie in [0, 0.5)")
        return v


class DrSettings(BaseModel):
    crossfit: bool = True
    time_mode: Literal["last", "pooled"] = "last"


class LearnerSettings(BaseModel):
    pooling: Literal["pooled", "unit_mean"] = "pooled"
    dr: DrSettings = DrSettings()


class BenchSettings(BaseModel):
    """Harness defaults; CLI flags override them."""

    methods: list[str] = ["h1sl", "h2sl", "dr", "s", "t", "x", "rlite", "did"]
    parallelism: int = 1
    eval_on: str = "all"
    record_timing: bool = False

    @field_validator("eval_on")
    @classmethod
    def eval_on_format(cls, v: str) -> str:
        if not _EVAL_ON.match(v):
            raise ValueError("bench.eval_on must be 'all', 'treated' or 'fresh:<k>'")
        return v

    @field_validator("parallelism")
    @classmethod
    def parallelism_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("bench.parallelism must be >= 1")
        return v


class EngineSettings(BaseModel):
    """Top-level configuration."""

    solver: SolverSettings = SolverSettings()
    regressor: RegressorSettings = RegressorSettings()
    propensity: PropensitySettings = PropensitySettings()
    learners: LearnerSettings = LearnerSettings()
    bench: BenchSettings = BenchSettings()

    # Auth & CORS for the HTTP surface
    api_key: str | None = None
    allowed_origins: list[str] = ["*"]

    @model_validator(mode="after")
    def validate_references(self) -> EngineSettings:
        from app.learners.registry import METHOD_REGISTRY

        for name in self.bench.methods:
            if name not in METHOD_REGISTRY:
                raise ValueError(
                    f"bench.methods references unknown method '{name}'. "
                    f"Available: {sorted(METHOD_REGISTRY.keys())}"
                )
        # the specs check their own ranges
        self.solver.constraint_spec()
        self.regressor.spec()
        return self

    def context(self, seed: int = 0, regressor: RegressorSpec | None = None) -> EstimatorContext:
        """Bundle the settings a learner needs; ``regressor`` overrides the configured one."""
        return EstimatorContext(
            regressor=regressor or self.regressor.spec(),
            constraint=self.solver.constraint_spec(),
            solver=self.solver.opts(),
            clip=self.propensity.clip,
            pooling=self.learners.pooling,
            dr_crossfit=self.learners.dr.crossfit,
            dr_time_mode=self.learners.dr.time_mode,
            seed=seed,
            n_jobs=self.solver.n_jobs,
        )


# ---------------------------------------------------------------------------
# Module-level config cache
# ---------------------------------------------------------------------------

_config: EngineSettings | None = None
_config_path: str = "config.yaml"


def load_config(path: str = "config.yaml", missing_ok: bool = False) -> EngineSettings:
    """Read config.yaml from disk, validate, and cache.

    With ``missing_ok`` an absent file yields the built-in defaults.
    """
    global _config, _config_path
    _config_path = path

    config_file = Path(path)
    if not config_file.exists():
        if not missing_ok:
            raise FileNotFoundError(f"Config file not found: {config_file.resolve()}")
        logger.info(f"No config file at {config_file.resolve()}, using defaults")
        _config = EngineSettings()
        return _config

    raw = yaml.safe_load(config_file.read_text()) or {}
    _config = EngineSettings(**raw)

    logger.info(
        f"Loaded config: constraint={_config.solver.constraint}, "
        f"regressor={_config.regressor.kind}, methods={_config.bench.methods}"
    )
    return _config


def get_config() -> EngineSettings:
    """Return cached config. Raises if not yet loaded."""
    if _config is None:
        raise RuntimeError("Config not loaded; call load_config() first")
    return _config


def reload_config() -> EngineSettings:
    """Re-read config from disk. Called by /reload endpoint."""
    logger.info(f"Reloading config from {_config_path}")
    return load_config(_config_path)
