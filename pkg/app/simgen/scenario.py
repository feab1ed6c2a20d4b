"""Scenario descriptions for the simulated factor-model panels.

A ``ScenarioConfig`` is a fully seeded experiment description; it round-trips
through JSON with the same field names. Named presets cover the linear,
cosine and null effect settings, each with i.i.d. or AR(1) outcome noise.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from app.errors import ConfigError
from app.regress import RegressorSpec

logger = logging.getLogger(__name__)

TauKind = Literal["linear", "cosine", "null"]


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    t0: int = 10
    t1: int = 10
    n_units: int = 50
    d: int = 2

    factor_rho: float = 0.95
    factor_noise_sd: float = 0.5
    outcome_noise_sd: float = 0.1
    loading_mean: float = 1.0
    loading_sd: float = 1.0
    ite_noise_sd: float = 0.0

    tau_kind: TauKind = "linear"
    error_kind: Literal["iid", "ar1"] = "iid"
    ar_phi: float = 0.2
    ar_innovation_sd: float = 1.0

    propensity_beta_mode: Literal["shared", "per_unit"] = "shared"
    treated_fraction: float | None = None
    max_assignment_tries: int = 100

    seed: int = 0
    regressor: RegressorSpec | None = None

    @field_validator("t0", "t1", "d")
    @classmethod
    def at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @field_validator("n_units")
    @classmethod
    def at_least_two_units(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"n_units must be >= 2, got {v}")
        return v

    @field_validator(
        "factor_noise_sd", "outcome_noise_sd", "loading_sd", "ite_noise_sd", "ar_innovation_sd"
    )
    @classmethod
    def sd_nonnegative(cls, v: float) -> float:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"standard deviations must be >= 0, got {v}")
        return v

    @field_validator("factor_rho", "ar_phi")
    @classmethod
    def within_unit_interval(cls, v: float) -> float:
        if not math.isfinite(v) or abs(v) > 1:
            raise ValueError(f"autoregressive coefficient must satisfy |rho| <= 1, got {v}")
        return v

    @field_validator("treated_fraction")
    @classmethod
    def fraction_open_interval(cls, v: float | None) -> float | None:
        if v is not None and not 0 < v < 1:
            raise ValueError(f"treated_fraction must lie in (0, 1), got {v}")
        return v

    @model_validator(mode="after")
    def tau_needs_two_features(self) -> ScenarioConfig:
        if self.tau_kind != "null" and self.d < 2:
            raise ValueError(f"tau_kind '{self.tau_kind}' reads two features; d must be >= 2")
        return self

    @property
    def n_periods(self) -> int:
        return self.t0 + self.t1

    def with_seed(self, seed: int) -> ScenarioConfig:
        return self.model_copy(update={"seed": int(seed)})


def tau_values(kind: TauKind, X: np.ndarray) -> np.ndarray:
    """Closed-form effect at each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    match kind:
        case "linear":
            return 0.6 * X[:, 0] + 0.4 * X[:, 1]
        case "cosine":
            return 0.6 * np.cos(X[:, 0]) + 0.4 * np.cos(X[:, 1])
        case "null":
            return np.zeros(X.shape[0])
        case _:
            raise ConfigError(f"Unknown tau_kind: {kind}")


def true_tau(config: ScenarioConfig, x: np.ndarray) -> float:
    """tau(x) for one feature vector of dimension ``config.d``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != config.d:
        raise ValueError(f"true_tau: expected a feature vector of length {config.d}, got {x.size}")
    return float(tau_values(config.tau_kind, x[None, :])[0])


PRESETS: dict[str, ScenarioConfig] = {
    "paper-a": ScenarioConfig(name="paper-a", tau_kind="linear"),
    "paper-b": ScenarioConfig(
        name="paper-b", tau_kind="cosine", regressor=RegressorSpec(kind="kernel")
    ),
    "paper-c": ScenarioConfig(name="paper-c", tau_kind="null"),
    "paper-a-ar1": ScenarioConfig(name="paper-a-ar1", tau_kind="linear", error_kind="ar1"),
    "paper-b-ar1": ScenarioConfig(
        name="paper-b-ar1",
        tau_kind="cosine",
        error_kind="ar1",
        regressor=RegressorSpec(kind="kernel"),
    ),
    "paper-c-ar1": ScenarioConfig(name="paper-c-ar1", tau_kind="null", error_kind="ar1"),
}


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Resolve a preset name or read a scenario JSON file."""
    if str(source) in PRESETS:
        return PRESETS[str(source)]
    path = Path(source)
    if not path.exists():
        raise ConfigError(
            f"Scenario '{source}' is neither a preset nor a file. Presets: {sorted(PRESETS)}"
        )
    try:
        scenario = ScenarioConfig.model_validate_json(path.read_text())
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario file {path}: {e}") from e
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


def save_scenario(config: ScenarioConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(config.model_dump_json(indent=2))
    return path
