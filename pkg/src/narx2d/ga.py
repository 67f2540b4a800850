"""Generational binary genetic algorithm used as the comparison baseline."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .records import SearchResult, TraceRecorder

__all__ = ["GAConfig", "rank_weights", "roulette_select", "single_point_crossover", "mutate", "run_ga"]


@dataclass(frozen=True)
class GAConfig:
    population: int = 80
    p_c: float = 0.45
    p_m: float = 0.01
    budget: int = 6000
    elitism: int = 2

    def __post_init__(self):
        if not 0.0 <= self.p_c <= 1.0 or not 0.0 <= self.p_m <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be smaller than the population")
        if self.budget < self.population:
            raise ValueError("budget must cover the initial population")

    @property
    def generations(self) -> int:
        """Generations including the initial population."""
        return self.budget // self.population


def rank_weights(fitness) -> np.ndarray:
    """Selection weights ``N - rank + 1`` with rank 1 for the lowest fitness.

    Ties share the order of appearance (stable sort).
    """
    fitness = np.asarray(fitness, dtype=float)
    n = fitness.size
    order = np.argsort(fitness, kind="stable")
    w = np.empty(n)
    w[order] = n - np.arange(n)
    return w


def roulette_select(weights, rng: np.random.Generator, size: int) -> np.ndarray:
    cum = np.cumsum(weights)
    r = rng.uniform(0.0, cum[-1], size=size)
    return np.minimum(np.searchsorted(cum, r, side="right"), len(cum) - 1)


def single_point_crossover(a, b, rng: np.random.Generator):
    n = a.size
    if n < 2:
        return a.copy(), b.copy()
    cut = int(rng.integers(1, n))
    return np.concatenate([a[:cut], b[cut:]]), np.concatenate([b[:cut], a[cut:]])


def mutate(bits, p_m: float, rng: np.random.Generator) -> np.ndarray:
    flips = rng.random(bits.size) < p_m
    out = bits ^ flips
    if not out.any():
        out[rng.integers(bits.size)] = True
    return out


def run_ga(problem: Callable[[np.ndarray], float], n_terms: int,
           config: GAConfig | None = None, rng: np.random.Generator | None = None,
           *, on_generation: Callable | None = None) -> SearchResult:
    """Minimise ``problem`` with rank-roulette selection, one-point crossover
    and bit-flip mutation. The ``elitism`` best individuals are carried over
    unchanged (and not re-evaluated); every offspring costs one evaluation.
    """
    config = config or GAConfig()
    rng = rng if rng is not None else np.random.default_rng()
    started = time.perf_counter()
    recorder = TraceRecorder(problem, config.budget)
    n = config.population

    pop = rng.random((n, n_terms)) < 0.5
    for i in range(n):
        while not pop[i].any():
            pop[i] = rng.random(n_terms) < 0.5
    fit = np.array([recorder(x) for x in pop])
    if on_generation is not None:
        on_generation(1, pop, fit)

    for gen in range(2, config.generations + 1):
        order = np.argsort(fit, kind="stable")
        elite = order[:config.elitism]
        n_children = n - config.elitism
        weights = rank_weights(fit)
        children = []
        while len(children) < n_children:
            i, j = roulette_select(weights, rng, 2)
            a, b = pop[i], pop[j]
            if rng.random() < config.p_c:
                a, b = single_point_crossover(a, b, rng)
            children.append(mutate(a, config.p_m, rng))
            if len(children) < n_children:
                children.append(mutate(b, config.p_m, rng))
        child_fit = [recorder(c) for c in children]
        pop = np.vstack([pop[elite]] + [np.asarray(children).reshape(-1, n_terms)])
        fit = np.concatenate([fit[elite], child_fit])
        if on_generation is not None:
            on_generation(gen, pop, fit)

    return recorder.result(wall_time=time.perf_counter() - started)
