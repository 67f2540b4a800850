"""Search outcomes, function-evaluation accounting and run records."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["BudgetExceeded", "TraceRecorder", "SearchResult", "RunRecord", "bits_to_str", "str_to_bits"]


class BudgetExceeded(RuntimeError):
    pass


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits, dtype=bool))


def str_to_bits(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) == ord("1")


@dataclass
class SearchResult:
    """Best-ever structure of one search with its best-so-far trace.

    The trace is stored as change points ``[(fe, value), ...]`` (1-based FE
    index at which the best-so-far fitness changed); :attr:`trace` expands it
    to one value per function evaluation.
    """

    best: np.ndarray
    best_fitness: float
    fe_count: int
    trace_points: list
    wall_time: float = 0.0

    @property
    def trace(self) -> np.ndarray:
        return expand_trace(self.trace_points, self.fe_count)

    @property
    def cardinality(self) -> int:
        return int(np.count_nonzero(self.best))


def expand_trace(points, n: int) -> np.ndarray:
    out = np.empty(n)
    if n == 0:
        return out
    for (fe, value), nxt in zip(points, list(points[1:]) + [(n + 1, None)]):
        out[fe - 1:nxt[0] - 1] = value
    return out


class TraceRecorder:
    """Wraps a fitness oracle: counts calls, enforces the budget, tracks the best."""

    def __init__(self, problem, budget: int):
        self.problem = problem
        self.budget = budget
        self.calls = 0
        self.best = None
        self.best_fitness = math.inf
        self.points = []

    @property
    def remaining(self) -> int:
        return self.budget - self.calls

    def __call__(self, bits) -> float:
        if self.calls >= self.budget:
            raise BudgetExceeded(f"budget of {self.budget} evaluations exhausted")
        self.calls += 1
        f = float(self.problem(bits))
        if f < self.best_fitness:
            self.best_fitness = f
            self.best = np.array(bits, dtype=bool)
            self.points.append((self.calls, f))
        return f

    def result(self, best=None, best_fitness=None, wall_time: float = 0.0) -> SearchResult:
        if best_fitness is not None and best_fitness > self.best_fitness:
            raise AssertionError("reported best is worse than the best evaluated structure")
        best = self.best if best is None else np.asarray(best, dtype=bool)
        return SearchResult(best.copy(), self.best_fitness, self.calls, list(self.points), wall_time)


@dataclass
class RunRecord:
    """One run of one experiment cell, as persisted in the JSON-lines log."""

    system: str
    algorithm: str
    fitness: str
    snr_db: float | None
    run: int
    seed: int
    data_seed: int
    status: str = "ok"
    best: str = ""
    best_fitness: float | None = None
    fe_count: int = 0
    trace_points: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str | None = None

    @property
    def key(self) -> tuple:
        return (self.system, self.algorithm, self.fitness, _snr_key(self.snr_db), self.run)

    @property
    def cell(self) -> tuple:
        return self.key[:4]

    @property
    def best_bits(self) -> np.ndarray:
        return str_to_bits(self.best)

    @property
    def trace(self) -> np.ndarray:
        return expand_trace([tuple(p) for p in self.trace_points], self.fe_count)

    def to_dict(self, include_time: bool = True) -> dict:
        d = {
            "system": self.system,
            "algorithm": self.algorithm,
            "fitness": self.fitness,
            "snr_db": self.snr_db,
            "run": self.run,
            "seed": self.seed,
            "data_seed": self.data_seed,
            "status": self.status,
            "best": self.best,
            "best_fitness": self.best_fitness,
            "fe_count": self.fe_count,
            "trace_points": [[int(fe), float(v)] for fe, v in self.trace_points],
            "error": self.error,
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_time), sort_keys=True)

    def canonical(self) -> str:
        """Serialisation without wall-clock time; identical for replayed runs."""
        return self.to_json(include_time=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d["trace_points"] = [(int(fe), float(v)) for fe, v in d.get("trace_points", [])]
        return cls(**d)


def _snr_key(snr):
    return "inf" if snr is None else float(snr)
