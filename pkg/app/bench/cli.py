"""``bench`` command line.

    bench run --scenario paper-a --methods h1sl,h2sl,x --reps 200 --seed 42 --out results.csv
    bench summarize --in results.csv --out summary.csv
    bench estimate --data panel.csv --method h1sl --out tau.csv
    bench presets

Exit codes: 0 ok, 1 configuration error, 2 I/O error, 3 every fit failed.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import pandas as pd
import yaml
from pydantic import ValidationError

from app.bench.results import read_results, summarize, write_results, write_summary
from app.bench.runner import parse_eval_on, run_experiment
from app.config import EngineSettings, load_config
from app.errors import ConfigError, HteError, PanelError
from app.learners.registry import METHOD_REGISTRY, parse_methods, run_method
from app.panel.io import load_csv
from app.simgen import PRESETS, load_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_ALL_FAILED = 3


def _cmd_run(args: argparse.Namespace, settings: EngineSettings) -> int:
    scenario = load_scenario(args.scenario)
    methods = parse_methods(args.methods or settings.bench.methods)
    eval_on = args.eval_on or settings.bench.eval_on
    parse_eval_on(eval_on)
    seed = scenario.seed if args.seed is None else args.seed
    parallelism = args.parallelism or settings.bench.parallelism
    record_timing = args.timing or settings.bench.record_timing

    results = run_experiment(
        scenario,
        methods,
        args.reps,
        parallelism,
        settings.context(seed=seed),
        base_seed=seed,
        eval_on=eval_on,
        record_timing=record_timing,
    )
    write_results(
        results,
        args.out,
        manifest={
            "scenario": scenario.model_dump(mode="json"),
            "methods": methods,
            "reps": args.reps,
            "seed": seed,
            "eval_on": eval_on,
            "settings": settings.model_dump(mode="json", exclude={"api_key"}),
        },
    )
    for row in summarize(results):
        logger.info(
            f"{row.method:>6}: median mse={row.median_mse}, failures={row.failure_count}/{row.n_reps}"
        )
    if all(not r.ok for r in results):
        logger.error("Every replication failed")
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_summarize(args: argparse.Namespace, settings: EngineSettings) -> int:
    rows = summarize(read_results(args.input))
    write_summary(rows, args.out)
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace, settings: EngineSettings) -> int:
    dataset = load_csv(args.data)
    try:
        estimate = run_method(args.method, dataset, settings.context(seed=args.seed))
        tau_hat = estimate.evaluate(dataset.features)
    except (ConfigError, PanelError):
        raise
    except HteError as e:
        logger.error(f"{args.method} failed on {args.data}: {e}")
        return EXIT_ALL_FAILED

    frame = pd.DataFrame(dataset.features, columns=list(dataset.feature_names))
    frame.insert(0, "unit_id", dataset.unit_ids)
    frame["tau_hat"] = tau_hat
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f"Wrote {len(frame)} unit estimates ({args.method}) to {out}")
    return EXIT_OK


def _cmd_presets(args: argparse.Namespace, settings: EngineSettings) -> int:
    for name, scenario in PRESETS.items():
        print(
            f"{name}: tau={scenario.tau_kind}, errors={scenario.error_kind}, "
            f"N={scenario.n_units}, T0={scenario.t0}, T1={scenario.t1}"
        )
    print("methods: " + ", ".join(f"{k} ({v.family})" for k, v in METHOD_REGISTRY.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench", description="Synthetic-control HTE learners: benchmark and estimate"
    )
    parser.add_argument("--config", default="config.yaml", help="Settings file (defaults apply if absent)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo comparison on a simulated scenario")
    run.add_argument("--scenario", required=True, help="Preset name or scenario JSON file")
    run.add_argument("--methods", help="Comma-separated method names (default: bench.methods)")
    run.add_argument("--reps", type=int, default=100)
    run.add_argument("--seed", type=int, help="Base seed (default: the scenario's seed)")
    run.add_argument("--parallelism", type=int, help="Concurrent replications")
    run.add_argument("--out", required=True, help="Results CSV path")
    run.add_argument("--eval-on", help="all | treated | fresh:<k>")
    run.add_argument("--timing", action="store_true", help="Record wall time per fit")
    run.set_defaults(handler=_cmd_run)

    summ = sub.add_parser("summarize", help="Aggregate a results CSV by scenario and method")
    summ.add_argument("--in", dest="input", required=True)
    summ.add_argument("--out", required=True)
    summ.set_defaults(handler=_cmd_summarize)

    est = sub.add_parser("estimate", help="Apply one learner to a long-format panel CSV")
    est.add_argument("--data", required=True)
    est.add_argument("--method", required=True)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--out", required=True)
    est.set_defaults(handler=_cmd_estimate)

    presets = sub.add_parser("presets", help="List scenario presets and methods")
    presets.set_defaults(handler=_cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))

    try:
        settings = load_config(args.config, missing_ok=args.config == "config.yaml")
    except (FileNotFoundError, ValidationError, yaml.YAMLError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (OSError, UnicodeDecodeError) as e:
        logger.error(f"I/O error reading configuration: {e}")
        return EXIT_IO

    try:
        return args.handler(args, settings)
    except (ConfigError, ValidationError, yaml.YAMLError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (
        OSError,
        PanelError,
        UnicodeDecodeError,
        pd.errors.EmptyDataError,
        pd.errors.ParserError,
    ) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        return EXIT_CONFIG
