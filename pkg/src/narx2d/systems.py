"""Benchmark NARX systems S1-S4 and synthetic data generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .narx_core import Dataset, DictionaryConfig, Term, TermDictionary, build_dictionary

__all__ = [
    "BenchmarkSystem",
    "SYSTEMS",
    "get_system",
    "generate_input",
    "simulate_system",
    "add_measurement_noise",
    "make_dataset",
]


@dataclass(frozen=True)
class BenchmarkSystem:
    """A known polynomial NARX system with its search dictionary.

    ``terms`` are listed in the reference order T1, T2, ... used by the
    result tables; ``theta`` holds the matching coefficients.
    """

    name: str
    config: DictionaryConfig
    terms: tuple[str, ...]
    theta: tuple[float, ...]

    @property
    def dictionary(self) -> TermDictionary:
        return _dictionary(self.config)

    @property
    def term_indices(self) -> np.ndarray:
        d = self.dictionary
        return np.array([d.index(t) for t in self.terms])

    @property
    def true_structure(self) -> np.ndarray:
        return self.dictionary.structure(self.terms)

    @property
    def max_lag(self) -> int:
        return self.config.max_lag

    def equation(self) -> str:
        parts = [f"{c:+g}*{Term.parse(t).render()}" for t, c in zip(self.terms, self.theta)]
        return "y(k) = " + " ".join(parts)


_DICT_CACHE: dict[DictionaryConfig, TermDictionary] = {}


def _dictionary(config):
    d = _DICT_CACHE.get(config)
    if d is None:
        d = _DICT_CACHE[config] = build_dictionary(config)
    return d


_C552 = DictionaryConfig(n_y=5, n_u=5, degree=2)
_C333 = DictionaryConfig(n_y=3, n_u=3, degree=3)

SYSTEMS = {
    "S1": BenchmarkSystem(
        "S1", _C552,
        ("y(k-1)", "u(k-1)", "y(k-1)*u(k-1)", "u(k-1)^2"),
        (0.5, 0.3, 0.3, 0.5),
    ),
    "S2": BenchmarkSystem(
        "S2", _C552,
        ("1", "y(k-1)", "u(k-2)", "y(k-2)^2", "u(k-1)^2"),
        (0.5, 0.5, 0.8, -0.05, 1.0),
    ),
    "S3": BenchmarkSystem(
        "S3", _C333,
        ("y(k-1)", "u(k-1)", "u(k-1)^2", "u(k-1)^3"),
        (0.8, 0.4, 0.4, 0.4),
    ),
    "S4": BenchmarkSystem(
        "S4", _C552,
        (
            "u(k-1)", "u(k-2)", "u(k-3)", "u(k-1)^2", "u(k-1)*u(k-2)",
            "u(k-1)*u(k-3)", "u(k-2)^2", "u(k-2)*u(k-3)", "u(k-3)^2",
            "y(k-1)", "y(k-2)", "y(k-3)", "y(k-4)", "y(k-1)^2",
            "y(k-1)*y(k-2)", "y(k-1)*y(k-3)", "y(k-1)*y(k-4)", "y(k-2)^2",
            "y(k-2)*y(k-3)", "y(k-2)*y(k-4)", "y(k-3)^2", "y(k-3)*y(k-4)",
            "y(k-4)^2",
        ),
        (
            0.8833, 0.0393, 0.8546, 0.8528, 0.7582,
            0.1750, 0.0864, 0.4916, 0.0711,
            -0.0375, -0.0598, -0.0370, -0.0468, -0.0476,
            -0.0781, -0.0189, -0.0626, -0.0221,
            -0.0617, -0.0378, -0.0041, -0.0543,
            -0.0603,
        ),
    ),
}


def get_system(name: str) -> BenchmarkSystem:
    try:
        return SYSTEMS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None


def generate_input(n: int, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """White excitation drawn i.i.d. from Uniform[-amplitude, amplitude]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    return rng.uniform(-amplitude, amplitude, size=n)


def simulate_system(system: BenchmarkSystem, u) -> np.ndarray:
    """Noise-free response from zero initial conditions."""
    u = np.asarray(u, dtype=float)
    if len(u) < system.max_lag + 1:
        raise ValueError("input shorter than the system memory")
    terms = [Term.parse(t) for t in system.terms]
    y = np.zeros(len(u))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(u)):
            acc = 0.0
            for term, c in zip(terms, system.theta):
                prod = c
                for sig, lag in term.factors:
                    if k - lag < 0:
                        prod = 0.0
                        break
                    prod *= y[k - lag] if sig == "y" else u[k - lag]
                acc += prod
            y[k] = acc
    if not np.all(np.isfinite(y)):
        raise FloatingPointError(f"{system.name} response is not finite for this input")
    return y


def add_measurement_noise(y, snr_db: float | None, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise with variance ``mean(y**2) / 10**(snr_db/10)``."""
    y = np.asarray(y, dtype=float)
    if snr_db is None or np.isinf(snr_db):
        return y.copy()
    power = float(np.mean(y * y))
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return y + rng.normal(0.0, sigma, size=y.shape)


def make_dataset(system: BenchmarkSystem | str, rng: np.random.Generator, n: int = 2000,
                 snr_db: float | None = None, amplitude: float = 1.0,
                 validation_fraction: float = 0.3, transient: int = 0) -> Dataset:
    """Excite ``system``, record its noisy output and split 70/30.

    The input and the measurement noise come from independent child streams
    of ``rng`` so that the noise realisation does not depend on the input.
    ``transient`` samples are simulated and discarded before the record.
    """
    if isinstance(system, str):
        system = get_system(system)
    input_rng, noise_rng = rng.spawn(2)
    u = generate_input(n + transient, input_rng, amplitude)
    y = simulate_system(system, u)[transient:]
    u = u[transient:]
    y_meas = add_measurement_noise(y, snr_db, noise_rng)
    split = n - int(round(validation_fraction * n))
    return Dataset(u, y_meas, split, snr_db=snr_db, max_lag=system.max_lag)
