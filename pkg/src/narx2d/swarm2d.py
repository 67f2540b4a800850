"""Two-dimensional unified particle swarm (2D-UPSO) for subset selection.

Each particle carries a 2 x N_t velocity of non-negative selection
likelihoods. The first row scores cardinalities (entry j is the likelihood
of a model with j+1 terms), the second scores individual terms. A new
position is formed by drawing a cardinality from the first row with a
roulette wheel and keeping that many of the highest-ranked terms of the
second row.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .records import SearchResult, TraceRecorder

__all__ = [
    "SwarmConfig",
    "Velocity2D",
    "LearningSet",
    "Particle",
    "init_swarm",
    "derive_learning_set",
    "compute_delta",
    "update_velocity",
    "select_cardinality",
    "update_position",
    "unification_factor",
    "ring_neighbour_best",
    "run_2dupso",
]

_DELTA_EPS = 1e-12


@dataclass(frozen=True)
class SwarmConfig:
    ps: int = 30
    omega: float = 0.729
    c1: float = 1.49
    c2: float = 1.49
    u0: float = 0.2
    uf: float = 0.7
    rg: int = 10
    budget: int = 6000

    def __post_init__(self):
        if self.ps < 3:
            raise ValueError("ring neighbourhood needs ps >= 3")
        if not 0.0 <= self.u0 <= self.uf <= 1.0:
            raise ValueError("need 0 <= u0 <= uf <= 1")
        if self.rg < 1:
            raise ValueError("refresh gap must be >= 1")
        if self.budget < self.ps:
            raise ValueError("budget must cover the initial swarm")

    @property
    def iterations(self) -> int:
        """Velocity/position updates after the initial evaluation."""
        return self.budget // self.ps - 1


@dataclass
class Velocity2D:
    rho: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.rho.shape != self.sigma.shape or self.rho.ndim != 1:
            raise ValueError("rho and sigma must be vectors of equal length")
        if (self.rho < 0).any() or (self.sigma < 0).any():
            raise ValueError("likelihoods must be non-negative")

    @classmethod
    def random(cls, n_terms: int, rng: np.random.Generator) -> "Velocity2D":
        m = rng.random((2, n_terms))
        return cls(m[0], m[1])

    def as_matrix(self) -> np.ndarray:
        return np.vstack([self.rho, self.sigma])


@dataclass
class LearningSet:
    rho_bits: np.ndarray
    sigma_bits: np.ndarray


@dataclass
class Particle:
    position: np.ndarray
    velocity: Velocity2D
    pbest: np.ndarray
    pbest_fitness: float = np.inf
    fitness: float = np.inf
    prev_fitness: float = np.inf
    stagnation_count: int = 0


def _random_structure(n_terms, rng):
    while True:
        bits = rng.random(n_terms) < 0.5
        if bits.any():
            return bits


def init_swarm(n_terms: int, config: SwarmConfig, rng: np.random.Generator) -> list[Particle]:
    """Uniform[0, 1] velocities and Bernoulli(0.5) non-empty positions."""
    if n_terms < 1:
        raise ValueError("need at least one term")
    swarm = []
    for _ in range(config.ps):
        v = Velocity2D.random(n_terms, rng)
        x = _random_structure(n_terms, rng)
        swarm.append(Particle(x, v, x.copy()))
    return swarm


def derive_learning_set(exemplar) -> LearningSet:
    """One-hot cardinality row and a copy of the exemplar's term bits."""
    bits = np.asarray(exemplar, dtype=bool)
    xi = int(np.count_nonzero(bits))
    if xi < 1:
        raise ValueError("exemplar must select at least one term")
    rho = np.zeros(bits.size, dtype=bool)
    rho[xi - 1] = True
    return LearningSet(rho, bits.copy())


def compute_delta(f_t: float, f_prev: float, swarm_fitness) -> float:
    """Signed self-learning weight.

    The magnitude is ``1 - g_t / max(G)`` where ``G`` is the swarm's fitness
    shifted to be positive when any value is non-positive; the sign is
    positive only for a strict improvement over the previous iteration.
    """
    f = np.asarray(swarm_fitness, dtype=float)
    lo = f.min()
    if lo <= 0:
        g_t = f_t - lo + _DELTA_EPS
        g_max = f.max() - lo + _DELTA_EPS
    else:
        g_t, g_max = f_t, f.max()
    delta = min(1.0, max(0.0, 1.0 - g_t / g_max))
    return delta if f_t < f_prev else -delta


def update_velocity(particle: Particle, gbest, nbest, u_t: float, config: SwarmConfig,
                    delta: float, rng: np.random.Generator) -> Velocity2D:
    """Blend of the global (gbest) and local (nbest) UPSO velocities, floored at 0.

    The random matrices R1, R2 are drawn once per call and shared by both
    components.
    """
    if not 0.0 <= u_t <= 1.0:
        raise ValueError("unification factor must lie in [0, 1]")
    v = particle.velocity.as_matrix()
    cog = _learning_matrix(particle.pbest)
    soc_g = _learning_matrix(gbest)
    soc_l = _learning_matrix(nbest)
    self_ = _learning_matrix(particle.position)
    r1 = rng.random(v.shape)
    r2 = rng.random(v.shape)
    common = config.omega * v + config.c1 * r1 * cog + delta * self_
    social = r2 * (u_t * soc_g + (1.0 - u_t) * soc_l)
    new = np.maximum(common + config.c2 * social, 0.0)
    return Velocity2D(new[0], new[1])


def _learning_matrix(bits):
    ls = derive_learning_set(bits)
    return np.vstack([ls.rho_bits, ls.sigma_bits]).astype(float)


def select_cardinality(rho, rng: np.random.Generator, r: float | None = None) -> int:
    """Roulette-wheel draw of a model size from the cardinality row.

    Returns the smallest ``j`` (1-based) whose cumulative likelihood reaches
    ``r ~ Uniform[0, sum(rho)]``. An all-zero row gives a uniform size.
    """
    rho = np.asarray(rho, dtype=float)
    cum = np.cumsum(rho)
    total = cum[-1]
    if not total > 0:
        return int(rng.integers(1, rho.size + 1))
    if r is None:
        r = rng.uniform(0.0, total)
    if r <= 0:
        return int(np.flatnonzero(rho > 0)[0]) + 1
    j = int(np.searchsorted(cum, r, side="left"))
    return min(j, rho.size - 1) + 1


def update_position(velocity: Velocity2D, rng: np.random.Generator, r: float | None = None) -> np.ndarray:
    """Keep the ``xi`` terms with the largest likelihood, ``xi`` drawn by roulette.

    Ties in the term likelihoods are broken by a random permutation.
    """
    xi = select_cardinality(velocity.rho, rng, r)
    sigma = velocity.sigma
    tiebreak = rng.permutation(sigma.size)
    order = np.lexsort((tiebreak, -sigma))
    bits = np.zeros(sigma.size, dtype=bool)
    bits[order[:xi]] = True
    return bits


def unification_factor(t: int, t_max: int, u0: float, uf: float) -> float:
    if t_max <= 0:
        return uf
    return u0 + (uf - u0) * t / t_max


def ring_neighbour_best(pbest_fitness, i: int) -> int:
    """Index of the best personal best among particles i-1, i, i+1 (cyclic)."""
    n = len(pbest_fitness)
    idx = [(i - 1) % n, i, (i + 1) % n]
    return min(idx, key=lambda k: (pbest_fitness[k], k))


def run_2dupso(problem: Callable[[np.ndarray], float], n_terms: int,
               config: SwarmConfig | None = None, rng: np.random.Generator | None = None,
               *, on_iteration: Callable | None = None) -> SearchResult:
    """Minimise ``problem`` over non-empty binary structures of length ``n_terms``.

    One function evaluation is charged per call of ``problem``. The swarm is
    updated synchronously: gbest, nbest and the fitness vector used for the
    self-learning weight are those at the start of the iteration.
    ``on_iteration(t, swarm, gbest, gbest_fitness)`` is an optional probe.
    """
    config = config or SwarmConfig()
    rng = rng if rng is not None else np.random.default_rng()
    started = time.perf_counter()
    recorder = TraceRecorder(problem, config.budget)

    swarm = init_swarm(n_terms, config, rng)
    for p in swarm:
        p.fitness = recorder(p.position)
        p.prev_fitness = p.fitness
        p.pbest_fitness = p.fitness
    g = int(np.argmin([p.pbest_fitness for p in swarm]))
    gbest, gbest_fitness = swarm[g].pbest.copy(), swarm[g].pbest_fitness
    if on_iteration is not None:
        on_iteration(0, swarm, gbest, gbest_fitness)

    t_max = config.iterations
    for t in range(1, t_max + 1):
        u_t = unification_factor(t, t_max, config.u0, config.uf)
        fitness = np.array([p.fitness for p in swarm])
        pbest_fit = [p.pbest_fitness for p in swarm]
        nbest = [swarm[ring_neighbour_best(pbest_fit, i)].pbest for i in range(len(swarm))]
        new_positions = []
        for i, p in enumerate(swarm):
            if p.stagnation_count >= config.rg:
                p.velocity = Velocity2D.random(n_terms, rng)
                p.stagnation_count = 0
            delta = compute_delta(p.fitness, p.prev_fitness, fitness)
            p.velocity = update_velocity(p, gbest, nbest[i], u_t, config, delta, rng)
            new_positions.append(update_position(p.velocity, rng))

        for p, x in zip(swarm, new_positions):
            p.position = x
            p.prev_fitness = p.fitness
            p.fitness = recorder(x)
            if p.fitness < p.pbest_fitness:
                p.pbest, p.pbest_fitness = x.copy(), p.fitness
            else:
                # pbest did not strictly improve this iteration
                p.stagnation_count += 1
            if p.pbest_fitness < gbest_fitness:
                gbest, gbest_fitness = p.pbest.copy(), p.pbest_fitness
        if on_iteration is not None:
            on_iteration(t, swarm, gbest, gbest_fitness)

    return recorder.result(gbest, gbest_fitness, time.perf_counter() - started)
