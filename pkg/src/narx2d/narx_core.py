"""Polynomial NARX term dictionaries, least-squares estimation and fitness.

A candidate model is a boolean vector over an ordered term dictionary. Its
fitness is obtained by estimating the coefficients on the estimation segment
(one-step regressors built from measured signals), simulating the model in
free run over the validation segment and scoring the residual energy with an
information criterion. Lower fitness is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.linalg

from ._kernels import simulate_terms

__all__ = [
    "DictionaryConfig",
    "Term",
    "TermDictionary",
    "Dataset",
    "EstimatedModel",
    "SimulationResult",
    "FitnessSpec",
    "FitnessEvaluator",
    "model_size",
    "build_dictionary",
    "build_regressor_matrix",
    "estimate_parameters",
    "simulate_free_run",
    "sse",
    "information_criterion",
    "evaluate_fitness",
    "check_structure",
]

# Largest count representable by the int64 arrays that index the dictionary.
_MAX_COUNT = np.iinfo(np.int64).max

DIVERGENCE_LIMIT = 1e8
DIVERGENCE_PENALTY = 1e12
SSE_FLOOR = 1e-300


@dataclass(frozen=True)
class DictionaryConfig:
    """Lags and polynomial degree that span the candidate term set."""

    n_y: int
    n_u: int
    degree: int
    n_e: int = 0

    def __post_init__(self):
        for name in ("n_y", "n_u", "degree", "n_e"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.n_y < 0 or self.n_u < 0 or self.n_e < 0:
            raise ValueError("lags must be non-negative")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.n_y + self.n_u < 1:
            raise ValueError("at least one input or output lag is required")

    @property
    def max_lag(self) -> int:
        return max(self.n_y, self.n_u)


@dataclass(frozen=True, order=True)
class Term:
    """A monomial in lagged outputs and inputs.

    ``factors`` is a sorted tuple of ``(signal, lag)`` pairs where ``signal``
    is ``"y"`` or ``"u"``; the empty tuple is the constant term.
    """

    factors: tuple[tuple[str, int], ...] = ()

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def output_lags(self) -> tuple[int, ...]:
        return tuple(lag for sig, lag in self.factors if sig == "y")

    def render(self) -> str:
        if not self.factors:
            return "1"
        return "*".join(f"{sig}(k-{lag})" for sig, lag in self.factors)

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "Term":
        """Inverse of :meth:`render`; also accepts ``^p`` powers."""
        text = text.replace(" ", "")
        if text == "1":
            return cls(())
        factors = []
        for part in text.split("*"):
            power = 1
            if "^" in part:
                part, p = part.split("^")
                power = int(p)
            if not (part[:4] in ("y(k-", "u(k-") and part.endswith(")")):
                raise ValueError(f"cannot parse term factor {part!r}")
            factors.extend([(part[0], int(part[4:-1]))] * power)
        return cls(_canonical_factors(factors))


def _factor_key(factor):
    sig, lag = factor
    return (0 if sig == "y" else 1, lag)


def _canonical_factors(factors):
    return tuple(sorted(factors, key=_factor_key))


def model_size(config: DictionaryConfig) -> int:
    """Number of candidate terms for the given lags and degree.

    Uses the recursion ``n_i = n_{i-1} (n_y + n_u + n_e + i - 1) / i`` with
    ``n_0 = 1`` and returns their sum.
    """
    n_vars = config.n_y + config.n_u + config.n_e
    n_i = 1
    total = 1
    for i in range(1, config.degree + 1):
        num = n_i * (n_vars + i - 1)
        if num % i:
            raise ArithmeticError(f"non-integral intermediate count at degree {i}")
        n_i = num // i
        total += n_i
        if total > _MAX_COUNT:
            raise OverflowError(f"model size exceeds {_MAX_COUNT}")
    return total


@dataclass(frozen=True)
class TermDictionary:
    """Ordered universe of candidate terms.

    Index 0 is the constant; terms follow in ascending degree and, within a
    degree, lexicographically on the sorted factor list with outputs before
    inputs and smaller lags first.
    """

    config: DictionaryConfig
    terms: tuple[Term, ...]
    codes: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, i):
        return self.terms[i]

    @property
    def max_lag(self) -> int:
        return self.config.max_lag

    def index(self, term: Term | str) -> int:
        if isinstance(term, str):
            term = Term.parse(term)
        return self.terms.index(term)

    def structure(self, terms) -> np.ndarray:
        """Boolean structure selecting the given terms (objects or strings)."""
        bits = np.zeros(len(self.terms), dtype=bool)
        for t in terms:
            bits[self.index(t)] = True
        return bits

    def render(self, bits=None) -> list[str]:
        if bits is None:
            return [t.render() for t in self.terms]
        return [self.terms[i].render() for i in np.flatnonzero(bits)]


def build_dictionary(config: DictionaryConfig) -> TermDictionary:
    """Enumerate the constant plus every monomial of degree 1..N_l.

    Noise terms are only counted by :func:`model_size`; a dictionary with
    ``n_e > 0`` cannot be built because the noise sequence is not observed.
    """
    if config.n_e:
        raise ValueError("noise lags (n_e > 0) cannot be enumerated into regressors")
    n_total = model_size(config)
    variables = [("y", j) for j in range(1, config.n_y + 1)]
    variables += [("u", j) for j in range(1, config.n_u + 1)]
    terms = [Term(())]
    for d in range(1, config.degree + 1):
        for combo in combinations_with_replacement(range(len(variables)), d):
            terms.append(Term(tuple(variables[v] for v in combo)))
    assert len(terms) == n_total
    codes = np.zeros((len(terms), config.degree), dtype=np.int64)
    for i, term in enumerate(terms):
        for j, (sig, lag) in enumerate(term.factors):
            codes[i, j] = lag if sig == "y" else -lag
    codes.setflags(write=False)
    return TermDictionary(config, tuple(terms), codes)


def check_structure(bits, n_terms: int | None = None) -> np.ndarray:
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim != 1:
        raise ValueError("structure must be a 1-D binary vector")
    if n_terms is not None and bits.size != n_terms:
        raise ValueError(f"structure has length {bits.size}, dictionary has {n_terms}")
    if not bits.any():
        raise ValueError("empty structure")
    return bits


@dataclass
class Dataset:
    """Synchronised input/output record split into estimation and validation."""

    u: np.ndarray
    y: np.ndarray
    split_index: int
    snr_db: float | None = None
    max_lag: int = 0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.u.shape != self.y.shape or self.u.ndim != 1:
            raise ValueError("u and y must be 1-D series of equal length")
        if not 0 < self.split_index < len(self.y):
            raise ValueError(f"split_index {self.split_index} outside (0, {len(self.y)})")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_validation(self) -> int:
        return len(self.y) - self.split_index

    def to_csv(self, path) -> None:
        k = np.arange(len(self.y))
        with open(path, "w", newline="") as fh:
            fh.write("k,u,y\n")
            for i, a, b in zip(k, self.u, self.y):
                fh.write(f"{i},{a:.17g},{b:.17g}\n")

    @classmethod
    def from_csv(cls, path, split_index: int | None = None, **kwargs) -> "Dataset":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        u, y = data[:, 1], data[:, 2]
        if split_index is None:
            split_index = int(round(0.7 * len(y)))
        return cls(u, y, split_index, **kwargs)


@dataclass
class EstimatedModel:
    structure: np.ndarray
    theta: np.ndarray
    condition_warning: bool = False


@dataclass
class SimulationResult:
    prediction: np.ndarray
    diverged: bool = False
    steps: int = 0


def _check_range(rows: range, max_lag: int, n: int) -> range:
    if rows.step != 1:
        raise ValueError("sample range must be contiguous")
    if rows.start < max_lag:
        raise ValueError(f"range starts at {rows.start}, before the maximum lag {max_lag}")
    if rows.stop > n or len(rows) < 1:
        raise ValueError(f"range {rows} outside the data (length {n})")
    return rows


def _term_column(term: Term, u: np.ndarray, y: np.ndarray, start: int, stop: int) -> np.ndarray:
    if not term.factors:
        return np.ones(stop - start)
    col = None
    for sig, lag in term.factors:
        src = y if sig == "y" else u
        f = src[start - lag:stop - lag]
        col = f.copy() if col is None else col * f
    return col


def candidate_matrix(dictionary: TermDictionary, u, y, start: int, stop: int) -> np.ndarray:
    """Regressors of every dictionary term over samples ``[start, stop)``."""
    out = np.empty((stop - start, len(dictionary)))
    for i, term in enumerate(dictionary.terms):
        out[:, i] = _term_column(term, u, y, start, stop)
    return out


def build_regressor_matrix(dictionary: TermDictionary, bits, data: Dataset, rows: range):
    """One-step regressor matrix and target for the selected terms."""
    bits = check_structure(bits, len(dictionary))
    rows = _check_range(rows, dictionary.max_lag, len(data))
    cols = [
        _term_column(dictionary.terms[i], data.u, data.y, rows.start, rows.stop)
        for i in np.flatnonzero(bits)
    ]
    return np.column_stack(cols), data.y[rows.start:rows.stop].copy()


def estimate_parameters(matrix, target, structure=None, n_obs: int | None = None) -> EstimatedModel:
    """Minimum-norm least squares via QR with column pivoting.

    Numerical rank is the number of diagonal entries of R above
    ``n_obs * eps * max column norm``; ``n_obs`` defaults to the row count
    and only needs overriding when ``matrix`` is an orthogonally reduced
    stand-in for a taller system. Rank-deficient problems are completed with
    a second orthogonal factorisation (complete orthogonal decomposition),
    which yields the minimum-norm solution.
    """
    a = np.asarray(matrix, dtype=float)
    b = np.asarray(target, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.size == 0:
        raise ValueError("empty regressor matrix")
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError("target length does not match the matrix rows")
    if structure is None:
        structure = np.ones(n, dtype=bool)
    if n_obs is None:
        n_obs = m

    q, r, perm = scipy.linalg.qr(a, mode="economic", pivoting=True, check_finite=False)
    qtb = q.T @ b
    diag = np.abs(np.diag(r))
    tol = n_obs * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.count_nonzero(diag > tol))
    theta = np.zeros(n)
    if rank == n:
        z = scipy.linalg.solve_triangular(r, qtb, check_finite=False)
    elif rank == 0:
        z = np.zeros(n)
    else:
        # R[:rank]^T = Q2 T  =>  minimum-norm z solves T^T w = c, z = Q2 w.
        q2, t = scipy.linalg.qr(r[:rank].T, mode="economic", check_finite=False)
        w = scipy.linalg.solve_triangular(t, qtb[:rank], trans="T", check_finite=False)
        z = q2 @ w
    theta[perm] = z
    return EstimatedModel(np.asarray(structure, dtype=bool), theta, rank < n)


def _simulate(dictionary, model, data, rows, feedback):
    rows = _check_range(rows, dictionary.max_lag, len(data))
    codes = np.ascontiguousarray(dictionary.codes[np.asarray(model.structure, dtype=bool)])
    theta = np.ascontiguousarray(model.theta, dtype=float)
    pred, bad = simulate_terms(
        codes, theta, data.u, data.y, rows.start, rows.stop,
        dictionary.max_lag, feedback, DIVERGENCE_LIMIT,
    )
    if bad >= 0:
        return SimulationResult(pred[:bad + 1], True, bad + 1)
    return SimulationResult(pred, False, len(rows))


def simulate_free_run(dictionary: TermDictionary, model: EstimatedModel, data: Dataset,
                      rows: range) -> SimulationResult:
    """Model-predicted output with predictions fed back into the output lags.

    The output lags are initialised from the measured samples immediately
    preceding ``rows``; inputs are always measured. Simulation stops and
    flags divergence once |y_hat| exceeds 1e8 or turns non-finite.
    """
    return _simulate(dictionary, model, data, rows, True)


def predict_one_step(dictionary: TermDictionary, model: EstimatedModel, data: Dataset,
                     rows: range) -> SimulationResult:
    return _simulate(dictionary, model, data, rows, False)


def sse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    r = y - y_hat
    return float(r @ r)


@dataclass(frozen=True)
class FitnessSpec:
    """Information criterion used as the (minimised) fitness.

    ``kind`` is ``"BIC"`` (penalty ln L per term) or ``"AIC"`` (penalty
    ``varrho`` per term).
    """

    kind: str = "BIC"
    varrho: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind == "AIC":
            if self.varrho is None or not self.varrho > 0:
                raise ValueError("AIC needs a positive varrho")
        elif kind == "BIC":
            if self.varrho is not None:
                raise ValueError("varrho only applies to AIC")
        else:
            raise ValueError(f"unknown criterion {self.kind!r}")

    def penalty(self, n_val: int) -> float:
        return math.log(n_val) if self.kind == "BIC" else float(self.varrho)

    @property
    def label(self) -> str:
        if self.kind == "BIC":
            return "BIC"
        return f"AIC({self.varrho:g})"

    @classmethod
    def parse(cls, text) -> "FitnessSpec":
        """Accepts ``BIC``, ``AIC(8)``, ``AIC:8`` or ``AIC8``."""
        if isinstance(text, FitnessSpec):
            return text
        s = str(text).strip().upper().replace(" ", "")
        if s == "BIC":
            return cls("BIC")
        if s.startswith("AIC"):
            rest = s[3:].strip(":()=")
            return cls("AIC", float(rest))
        raise ValueError(f"cannot parse fitness {text!r}")


def information_criterion(e: float, n_val: int, cardinality: int, spec: FitnessSpec,
                          floor: float = SSE_FLOOR) -> float:
    """``L ln(e) + penalty * xi`` with ``e`` floored before the logarithm."""
    return n_val * math.log(max(e, floor, SSE_FLOOR)) + spec.penalty(n_val) * cardinality


class FitnessEvaluator:
    """Fitness oracle over structures for one dataset and criterion.

    The estimation regressors of the whole dictionary and the target are
    reduced once by a thin QR factorisation; every candidate's least-squares
    problem is then solved on the (N_t+1)-row triangular factor, which has
    the same solution and residual as the full problem because the reduction
    is orthogonal.

    ``calls`` counts every invocation (one function evaluation each); repeated
    structures are answered from a cache but still counted.
    """

    def __init__(self, dictionary: TermDictionary, data: Dataset, spec: FitnessSpec | None = None,
                 mode: str = "free_run", cache: bool = True):
        if mode not in ("free_run", "one_step"):
            raise ValueError(f"unknown simulation mode {mode!r}")
        self.dictionary = dictionary
        self.data = data
        self.spec = spec if spec is not None else FitnessSpec()
        self.mode = mode
        self.calls = 0
        lag = dictionary.max_lag
        self.est_rows = range(lag, data.split_index)
        self.val_rows = range(max(data.split_index, lag), len(data))
        if len(self.est_rows) < 1 or len(self.val_rows) < 1:
            raise ValueError("estimation or validation segment is empty")
        a = candidate_matrix(dictionary, data.u, data.y, self.est_rows.start, self.est_rows.stop)
        ab = np.column_stack([a, data.y[self.est_rows.start:self.est_rows.stop]])
        self.n_obs = ab.shape[0]
        if ab.shape[0] > ab.shape[1]:
            ab = np.linalg.qr(ab, mode="r")
        self._reduced = ab
        self.y_val = data.y[self.val_rows.start:self.val_rows.stop]
        self.n_val = len(self.val_rows)
        # Residual energies below eps * ||y_val||^2 are round-off: treat as exact fits.
        self.sse_floor = max(SSE_FLOOR, np.finfo(float).eps * float(self.y_val @ self.y_val))
        self._cache = {} if cache else None

    def estimate(self, bits) -> EstimatedModel:
        bits = check_structure(bits, len(self.dictionary))
        idx = np.flatnonzero(bits)
        return estimate_parameters(self._reduced[:, idx], self._reduced[:, -1], bits, n_obs=self.n_obs)

    def simulate(self, model: EstimatedModel) -> SimulationResult:
        return _simulate(self.dictionary, model, self.data, self.val_rows, self.mode == "free_run")

    def details(self, bits) -> dict:
        model = self.estimate(bits)
        sim = self.simulate(model)
        xi = int(np.count_nonzero(model.structure))
        if sim.diverged:
            e, j = math.inf, DIVERGENCE_PENALTY
        else:
            e = sse(self.y_val, sim.prediction)
            j = information_criterion(e, self.n_val, xi, self.spec, self.sse_floor)
            if not math.isfinite(j):
                j = DIVERGENCE_PENALTY
        return {"model": model, "simulation": sim, "sse": e, "fitness": j, "cardinality": xi}

    def __call__(self, bits) -> float:
        self.calls += 1
        bits = np.asarray(bits, dtype=bool)
        if self._cache is None:
            return self.details(bits)["fitness"]
        key = np.packbits(bits).tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self.details(bits)["fitness"]
        return hit


def evaluate_fitness(bits, dictionary: TermDictionary, data: Dataset, spec: FitnessSpec,
                     mode: str = "free_run") -> float:
    """Fitness of a single structure; build a :class:`FitnessEvaluator` for repeated use."""
    return FitnessEvaluator(dictionary, data, spec, mode=mode, cache=False)(bits)
