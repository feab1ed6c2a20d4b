"""Monte Carlo harness and command line."""

from app.bench.results import read_results, summarize, write_results, write_summary
from app.bench.runner import replication_seed, run_experiment, splitmix64

__all__ = [
    "read_results",
    "replication_seed",
    "run_experiment",
    "splitmix64",
    "summarize",
    "write_results",
    "write_summary",
]
