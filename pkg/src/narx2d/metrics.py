"""Selection-frequency statistics over independent search runs."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = ["FrequencyTable", "selection_frequency", "spurious_stats", "extract_structure", "NoStructureError"]


class NoStructureError(ValueError):
    """No term reaches the extraction threshold."""


@dataclass
class FrequencyTable:
    """Per-term selection counts over ``runs`` final structures."""

    counts: np.ndarray
    runs: int
    system_terms: np.ndarray | None = None

    @property
    def nu(self) -> np.ndarray:
        return self.counts / self.runs

    @property
    def n_terms(self) -> int:
        return self.counts.size

    def nu_exact(self, i: int) -> Fraction:
        return Fraction(int(self.counts[i]), self.runs)

    @property
    def spurious(self) -> np.ndarray:
        """Terms selected at least once that are not system terms."""
        if self.system_terms is None:
            raise ValueError("system terms are not defined for this table")
        return (self.counts > 0) & ~self.system_terms


def selection_frequency(structures, n_terms: int | None = None, system_terms=None) -> FrequencyTable:
    """Fraction of runs whose final structure contains each term."""
    mats = [np.asarray(s, dtype=bool) for s in structures]
    if not mats:
        raise ValueError("no structures to aggregate")
    n = mats[0].size if n_terms is None else n_terms
    if any(m.shape != (n,) for m in mats):
        raise ValueError(f"all structures must have length {n}")
    counts = np.sum(mats, axis=0).astype(np.int64)
    if system_terms is not None:
        system_terms = np.asarray(system_terms, dtype=bool)
        if system_terms.shape != (n,):
            raise ValueError("system_terms length mismatch")
    return FrequencyTable(counts, len(mats), system_terms)


def spurious_stats(table: FrequencyTable) -> tuple[float, float]:
    """Return ``(r, nu_max)``: the spurious-term ratio and largest spurious frequency."""
    spur = table.spurious
    n_spur = int(np.count_nonzero(spur))
    nu_max = float(table.nu[spur].max()) if n_spur else 0.0
    return n_spur / table.n_terms, nu_max


def extract_structure(table: FrequencyTable, threshold: float = 0.9) -> np.ndarray:
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    # compare counts to avoid rounding in counts/runs
    bits = table.counts >= threshold * table.runs - 1e-9
    if not bits.any():
        raise NoStructureError(f"no term reaches the threshold {threshold}")
    return bits
