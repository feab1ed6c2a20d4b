"""Simulated panels from a one-factor model with known effects.

    f_1 = 1,  f_t = rho f_{t-1} + u_t                u_t ~ N(0, factor_noise_sd^2)
    Y_it(0) = b_i f_t + e_it                          b_i ~ N(loading_mean, loading_sd^2)
    Y_it(1) = Y_it(0) + tau(X_i) [+ ITE noise], t > t0  X_i ~ N(0, I_d)
    D_i ~ Bernoulli(expit(X_i' beta))                 beta ~ N(1_d, I_d)

e_it is i.i.d. N(0, outcome_noise_sd^2) or, for ``error_kind="ar1"``, the
per-unit recursion e_it = phi e_i,t-1 + z_it with e_i0 = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from app.errors import ConfigError
from app.panel.dataset import PanelDataset
from app.simgen.scenario import ScenarioConfig, tau_values

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimulatedPanel:
    dataset: PanelDataset
    config: ScenarioConfig
    true_tau_at: np.ndarray     # tau at each dataset row's features
    y0: np.ndarray              # potential outcomes, dataset row order
    y1: np.ndarray
    generator_state: dict[str, Any] = field(default_factory=dict)


def _factor_path(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    shocks = rng.normal(0.0, config.factor_noise_sd, config.n_periods)
    f = np.empty(config.n_periods)
    f[0] = 1.0
    for t in range(1, config.n_periods):
        f[t] = config.factor_rho * f[t - 1] + shocks[t]
    return f


def _outcome_noise(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    shape = (config.n_units, config.n_periods)
    if config.error_kind == "iid":
        return rng.normal(0.0, config.outcome_noise_sd, shape)
    z = rng.normal(0.0, config.ar_innovation_sd, shape)
    noise = np.empty(shape)
    noise[:, 0] = z[:, 0]
    for t in range(1, config.n_periods):
        noise[:, t] = config.ar_phi * noise[:, t - 1] + z[:, t]
    return noise


def _assign(config: ScenarioConfig, p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = config.n_units
    for _ in range(config.max_assignment_tries):
        if config.treated_fraction is not None:
            k = min(max(round(config.treated_fraction * n), 1), n - 1)
            mask = np.zeros(n, dtype=bool)
            mask[rng.choice(n, size=k, replace=False, p=p / p.sum())] = True
        else:
            mask = rng.random(n) < p
        if 0 < mask.sum() < n:
            return mask
    raise ConfigError(
        f"Scenario '{config.name}' (seed {config.seed}) produced a single-class assignment "
        f"{config.max_assignment_tries} times"
    )


def generate(config: ScenarioConfig) -> SimulatedPanel:
    """Draw one panel; identical configs give bitwise-identical panels."""
    rng = np.random.default_rng(config.seed)
    n, d = config.n_units, config.d

    factor = _factor_path(config, rng)
    loadings = rng.normal(config.loading_mean, config.loading_sd, n)
    noise = _outcome_noise(config, rng)
    X = rng.normal(size=(n, d))

    if config.propensity_beta_mode == "shared":
        beta = rng.normal(1.0, 1.0, d)
        index = X @ beta
    else:
        beta = rng.normal(1.0, 1.0, (n, d))
        index = np.sum(X * beta, axis=1)
    propensity = expit(index)
    treated = _assign(config, propensity, rng)

    tau = tau_values(config.tau_kind, X)
    ite_noise = rng.normal(0.0, config.ite_noise_sd, (n, config.n_periods))

    post = np.arange(1, config.n_periods + 1) > config.t0
    y0 = loadings[:, None] * factor[None, :] + noise
    y1 = y0 + (tau[:, None] + ite_noise) * post[None, :]
    observed = np.where(treated[:, None] & post[None, :], y1, y0)

    dataset = PanelDataset.from_arrays(
        outcomes=observed,
        features=X,
        treated_mask=treated,
        t0=config.t0,
        feature_names=tuple(f"x{k + 1}" for k in range(d)),
    )
    order = dataset.unit_ids.astype(int)
    logger.debug(
        f"Generated '{config.name}' seed={config.seed}: N={n}, T={config.n_periods}, "
        f"treated={int(treated.sum())}"
    )
    return SimulatedPanel(
        dataset=dataset,
        config=config,
        true_tau_at=tau[order],
        y0=y0[order],
        y1=y1[order],
        generator_state={
            "factor": factor,
            "loadings": loadings[order],
            "beta": beta if beta.ndim == 1 else beta[order],
            "propensity": propensity[order],
        },
    )
