"""Run planning, seeding and (parallel, resumable) execution."""

from __future__ import annotations

import hashlib
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..ga import run_ga
from ..narx_core import FitnessEvaluator, FitnessSpec
from ..records import RunRecord, bits_to_str
from ..swarm2d import run_2dupso
from ..systems import make_dataset
from .config import ExperimentConfig

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stable_hash(*parts) -> int:
    text = "|".join("none" if p is None else str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def mix_seed(base_seed: int, *parts) -> int:
    return splitmix64((base_seed ^ stable_hash(*parts)) & _MASK64)


@dataclass(frozen=True)
class PlannedRun:
    system: str
    algorithm: str
    fitness: str
    snr_db: float | None
    run: int
    seed: int
    data_seed: int

    @property
    def key(self) -> tuple:
        return (self.system, self.algorithm, self.fitness, "inf" if self.snr_db is None else float(self.snr_db), self.run)


def plan_runs(config: ExperimentConfig) -> list[PlannedRun]:
    """Cartesian product of all factors and run indices, with per-run seeds.

    The search seed mixes every factor and the run index into ``base_seed``.
    The data seed ignores algorithm and criterion so that all searches on
    the same (system, SNR, run) see the same record; in ``fixed`` data mode
    it also ignores the run index.
    """
    plan = []
    for system in config.systems:
        for alg in config.algorithms:
            for spec in config.fitness:
                for snr in config.snr_db:
                    for run in range(config.runs):
                        seed = mix_seed(config.base_seed, system, alg, spec.label, snr, run)
                        if config.data_mode == "fixed":
                            data_seed = mix_seed(config.base_seed, "data", system, snr)
                        else:
                            data_seed = mix_seed(config.base_seed, "data", system, snr, run)
                        plan.append(PlannedRun(system, alg, spec.label, snr, run, seed, data_seed))
    seeds = [p.seed for p in plan]
    if len(set(seeds)) != len(seeds):
        raise RuntimeError("seed collision in run plan")
    return plan


def build_problem(config: ExperimentConfig, planned: PlannedRun):
    """Dataset and fitness oracle for one planned run."""
    system = config.system(planned.system)
    data = make_dataset(system, np.random.default_rng(planned.data_seed), n=config.n_samples,
                        snr_db=planned.snr_db, amplitude=config.amplitude,
                        validation_fraction=config.validation_fraction)
    return FitnessEvaluator(system.dictionary, data, FitnessSpec.parse(planned.fitness))


def execute_run(config: ExperimentConfig, planned: PlannedRun, problem_factory=None) -> RunRecord:
    """Execute one run; exceptions become a ``failed`` record."""
    record = RunRecord(planned.system, planned.algorithm, planned.fitness, planned.snr_db,
                       planned.run, planned.seed, planned.data_seed)
    try:
        factory = problem_factory or build_problem
        problem = factory(config, planned)
        n_terms = len(config.system(planned.system).dictionary)
        rng = np.random.default_rng(planned.seed)
        if planned.algorithm == "2dupso":
            res = run_2dupso(problem, n_terms, config.swarm_config(), rng)
        else:
            res = run_ga(problem, n_terms, config.ga_config(), rng)
    except Exception as exc:  # noqa: BLE001 - isolate failures per run
        record.status = "failed"
        record.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return record
    record.best = bits_to_str(res.best)
    record.best_fitness = float(res.best_fitness)
    record.fe_count = res.fe_count
    record.trace_points = [(int(fe), float(v)) for fe, v in res.trace_points]
    record.wall_time = res.wall_time
    return record


def _worker(args):
    config, planned, factory = args
    return execute_run(config, planned, factory)


def load_records(path) -> list[RunRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                out.append(RunRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError:
                log.warning("skipping truncated record line in %s", path)
    return out


def execute(config: ExperimentConfig, plan: list[PlannedRun], workers: int = 1,
            records_path=None, problem_factory=None) -> list[RunRecord]:
    """Run ``plan``, appending one JSON line per finished run to ``records_path``.

    Keys already present in ``records_path`` are skipped, so an interrupted
    sweep resumes where it stopped. The returned list follows plan order
    whatever the completion order was.
    """
    if not plan:
        raise ValueError("empty run plan")
    done = {}
    if records_path is not None:
        records_path = Path(records_path)
        records_path.parent.mkdir(parents=True, exist_ok=True)
        for rec in load_records(records_path):
            done.setdefault(rec.key, rec)
    todo = [p for p in plan if p.key not in done]
    if done:
        log.info("resuming: %d of %d runs already recorded", len(plan) - len(todo), len(plan))

    fh = records_path.open("a") if records_path is not None else None
    if fh is not None and records_path.stat().st_size:
        with records_path.open("rb") as tail:
            tail.seek(-1, 2)
            if tail.read(1) != b"\n":
                fh.write("\n")  # terminate a line cut short by an interrupted run
    try:
        def emit(rec):
            done[rec.key] = rec
            if fh is not None:
                fh.write(rec.to_json() + "\n")
                fh.flush()
            log.info("%s %s %s snr=%s run=%d: %s J=%s", rec.system, rec.algorithm, rec.fitness,
                     rec.snr_db, rec.run, rec.status, rec.best_fitness)

        if workers <= 1:
            for p in todo:
                emit(execute_run(config, p, problem_factory))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_worker, (config, p, problem_factory)) for p in todo]
                for fut in as_completed(futures):
                    emit(fut.result())
    finally:
        if fh is not None:
            fh.close()
    return [done[p.key] for p in plan]
