"""Exhaustive structure search for small dictionaries."""

from __future__ import annotations

import numpy as np

MAX_EXHAUSTIVE_TERMS = 24


def iter_structures(n_terms: int, chunk: int = 4096):
    """Yield every non-empty structure as rows of boolean blocks."""
    if n_terms > MAX_EXHAUSTIVE_TERMS:
        raise ValueError(f"exhaustive search limited to {MAX_EXHAUSTIVE_TERMS} terms")
    total = 1 << n_terms
    shifts = np.arange(n_terms, dtype=np.int64)
    for lo in range(1, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        yield ((codes[:, None] >> shifts) & 1).astype(bool)


def exhaustive_search(problem, n_terms: int) -> dict:
    """Evaluate all 2**n_terms - 1 structures; ties keep the first in enumeration order."""
    best, best_f, count = None, np.inf, 0
    for block in iter_structures(n_terms):
        for bits in block:
            f = problem(bits)
            count += 1
            if f < best_f:
                best, best_f = bits.copy(), f
    return {"best": best, "best_fitness": float(best_f), "evaluations": count}
