"""Monte Carlo runner: simulate, fit every method, score against the true effect.

Replications are independent jobs dispatched through joblib. Each one derives
its seed from (base seed, replication index), so the output does not depend on
the degree of parallelism or on scheduling order.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from typing import Literal

import numpy as np
from joblib import Parallel, delayed

from app.errors import ConfigError
from app.learners.registry import EstimatorContext, resolve_method
from app.schemas import RunResult
from app.simgen import ScenarioConfig, SimulatedPanel, generate, tau_values

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 mixer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(base_seed: int, replication: int) -> int:
    return (base_seed & _MASK64) ^ splitmix64(replication)


def parse_eval_on(eval_on: str) -> tuple[Literal["all", "treated", "fresh"], int]:
    """``"all"`` / ``"treated"`` / ``"fresh:k"`` -> (mode, k)."""
    if eval_on in ("all", "treated"):
        return eval_on, 0
    mode, _, count = eval_on.partition(":")
    if mode == "fresh" and count.isdigit() and int(count) > 0:
        return "fresh", int(count)
    raise ConfigError(f"Invalid eval_on '{eval_on}'. Expected 'all', 'treated' or 'fresh:<k>'")


def evaluation_points(panel: SimulatedPanel, eval_on: str, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Feature rows to score at and the true effect there."""
    mode, k = parse_eval_on(eval_on)
    dataset = panel.dataset
    match mode:
        case "all":
            return dataset.features, panel.true_tau_at
        case "treated":
            rows = dataset.treated_idx
            return dataset.features[rows], panel.true_tau_at[rows]
        case "fresh":
            # separate stream so the panel draws are untouched
            rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
            X = rng.normal(size=(k, dataset.n_features))
            return X, tau_values(panel.config.tau_kind, X)


def _failed(scenario: ScenarioConfig, method: str, r: int, seed: int, reason: str) -> RunResult:
    reason = " ".join(str(reason).split()) or "unknown error"
    return RunResult(
        scenario=scenario.name, method=method, replication=r, seed=seed, status=f"failed: {reason}"
    )


def score_method(
    method: str,
    panel: SimulatedPanel,
    X_eval: np.ndarray,
    tau_eval: np.ndarray,
    context: EstimatorContext,
    replication: int,
    record_timing: bool = False,
) -> RunResult:
    """Fit one method on one panel. Failures come back as a failed row."""
    scenario, seed = panel.config, panel.config.seed
    start = time.perf_counter_ns()
    try:
        estimate = resolve_method(method).runner(panel.dataset, context)
        tau_hat = estimate.evaluate(X_eval)
    except Exception as e:
        logger.warning(f"{scenario.name} rep {replication}: {method} failed: {e}")
        return _failed(scenario, method, replication, seed, f"{type(e).__name__}: {e}")
    elapsed_ms = (time.perf_counter_ns() - start) // 1_000_000

    if not np.all(np.isfinite(tau_hat)):
        return _failed(scenario, method, replication, seed, "non-finite estimate")
    sum_se = float(np.sum((tau_hat - tau_eval) ** 2))
    return RunResult(
        scenario=scenario.name,
        method=method,
        replication=replication,
        seed=seed,
        mse=sum_se / tau_eval.size,
        sum_se=sum_se,
        wall_time_ms=int(elapsed_ms) if record_timing else 0,
    )


def run_replication(
    scenario: ScenarioConfig,
    methods: list[str],
    replication: int,
    base_seed: int,
    context: EstimatorContext,
    eval_on: str = "all",
    record_timing: bool = False,
) -> list[RunResult]:
    seed = replication_seed(base_seed, replication)
    config = scenario.with_seed(seed)
    try:
        panel = generate(config)
    except Exception as e:
        logger.warning(f"{scenario.name} rep {replication}: panel generation failed: {e}")
        return [_failed(scenario, m, replication, seed, f"{type(e).__name__}: {e}") for m in methods]

    if scenario.regressor is not None:
        context = dataclasses.replace(context, regressor=scenario.regressor)
    context = dataclasses.replace(context, seed=seed)
    X_eval, tau_eval = evaluation_points(panel, eval_on, seed)
    return [
        score_method(m, panel, X_eval, tau_eval, context, replication, record_timing) for m in methods
    ]


def run_experiment(
    scenario: ScenarioConfig,
    methods: list[str],
    reps: int,
    parallelism: int = 1,
    context: EstimatorContext | None = None,
    *,
    base_seed: int | None = None,
    eval_on: str = "all",
    record_timing: bool = False,
) -> list[RunResult]:
    """Run ``reps`` replications of ``scenario`` for every method.

    ``base_seed`` defaults to the scenario's own seed. Results are ordered by
    replication, then by the order of ``methods``.
    """
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    if parallelism < 1:
        raise ConfigError(f"parallelism must be >= 1, got {parallelism}")
    if not methods:
        raise ConfigError("methods must name at least one method")
    for m in methods:
        resolve_method(m)
    parse_eval_on(eval_on)

    context = context or EstimatorContext()
    base_seed = scenario.seed if base_seed is None else base_seed
    logger.info(
        f"Running '{scenario.name}': {reps} reps x {len(methods)} methods "
        f"(seed={base_seed}, parallelism={parallelism}, eval_on={eval_on})"
    )

    batches = Parallel(n_jobs=parallelism)(
        delayed(run_replication)(scenario, methods, r, base_seed, context, eval_on, record_timing)
        for r in range(reps)
    )
    results = [row for batch in batches for row in batch]

    failures = sum(not row.ok for row in results)
    logger.info(f"Finished '{scenario.name}': {len(results)} fits, {failures} failed")
    return results
