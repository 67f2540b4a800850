"""Experiment orchestration: configs, seeded run plans, execution and reports."""

from .config import ExperimentConfig, dump_config, load_config
from .oracle import exhaustive_search, iter_structures
from .runner import PlannedRun, build_problem, execute, execute_run, load_records, mix_seed, plan_runs, splitmix64
from .summary import summarize

__all__ = [
    "ExperimentConfig",
    "PlannedRun",
    "build_problem",
    "dump_config",
    "execute",
    "execute_run",
    "exhaustive_search",
    "iter_structures",
    "load_config",
    "load_records",
    "mix_seed",
    "plan_runs",
    "splitmix64",
    "summarize",
]
