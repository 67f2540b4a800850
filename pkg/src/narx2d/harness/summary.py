"""Aggregate run records into frequency tables, metrics and convergence data."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..metrics import NoStructureError, extract_structure, selection_frequency, spurious_stats
from ..records import RunRecord
from .config import ExperimentConfig


def _snr_label(snr):
    return "none" if snr is None else f"{float(snr):g}dB"


def cell_name(system, algorithm, fitness, snr) -> str:
    f = fitness.replace("(", "").replace(")", "")
    return f"{system}_{algorithm}_{f}_{_snr_label(snr)}"


def _fmt(x) -> str:
    return repr(float(x))


def summarize_cell(records: list[RunRecord], config: ExperimentConfig, threshold: float = 0.9,
                   expected_runs: int | None = None) -> dict:
    """Metrics for one (system, algorithm, fitness, SNR) cell."""
    first = records[0]
    system = config.system(first.system)
    dictionary = system.dictionary
    ok = [rec for rec in records if rec.status == "ok"]
    failed = len(records) - len(ok)
    out = {
        "system": first.system,
        "algorithm": first.algorithm,
        "fitness": first.fitness,
        "snr_db": first.snr_db,
        "runs": len(ok),
        "failed_runs": failed,
        "expected_runs": expected_runs if expected_runs is not None else config.runs,
    }
    out["complete"] = len(ok) == out["expected_runs"]
    if not ok:
        return out
    table = selection_frequency([r.best_bits for r in ok], len(dictionary), system.true_structure)
    ratio, nu_max = spurious_stats(table)
    nu = table.nu
    sys_idx = system.term_indices
    try:
        extracted = dictionary.render(extract_structure(table, threshold))
    except NoStructureError:
        extracted = []
    best = np.array([rec.best_fitness for rec in ok])
    n_fe = min(rec.fe_count for rec in ok)
    mean_trace = np.mean([rec.trace[:n_fe] for rec in ok], axis=0)
    out.update({
        "r": ratio,
        "nu_max": nu_max,
        "n_spurious": int(np.count_nonzero(table.spurious)),
        "system_terms": [dictionary[i].render() for i in sys_idx],
        "system_nu": [float(nu[i]) for i in sys_idx],
        "nu": {dictionary[i].render(): float(nu[i]) for i in range(len(dictionary))},
        "threshold": threshold,
        "extracted": extracted,
        "extracted_is_true_structure": sorted(extracted) == sorted(dictionary.render(system.true_structure)),
        "mean_best_fitness": float(best.mean()),
        "best_fitness": [float(b) for b in best],
        "_table": table,
        "_mean_trace": mean_trace,
    })
    return out


def _frequency_csv(cell, config) -> str:
    system = config.system(cell["system"])
    d = system.dictionary
    truth = system.true_structure
    table = cell["_table"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["term", "rendered_term", "nu", "is_system_term"])
    for i in range(len(d)):
        w.writerow([i, d[i].render(), _fmt(table.nu[i]), int(truth[i])])
    return buf.getvalue()


def _convergence_csv(cell) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fe", "mean_best_fitness", "algorithm"])
    for fe, v in enumerate(cell["_mean_trace"], start=1):
        w.writerow([fe, _fmt(v), cell["algorithm"]])
    return buf.getvalue()


def _system_table_csv(cells) -> str:
    n = max(len(c.get("system_nu", [])) for c in cells)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "fitness", "snr_db", "runs"] + [f"T{i + 1}" for i in range(n)] + ["r", "nu_max"])
    for c in cells:
        if "system_nu" not in c:
            continue
        w.writerow([c["algorithm"], c["fitness"], _snr_label(c["snr_db"]), c["runs"]]
                   + [f"{v:.2f}" for v in c["system_nu"]] + [f"{c['r']:.2f}", f"{c['nu_max']:.2f}"])
    return buf.getvalue()


def summarize(records: list[RunRecord], config: ExperimentConfig, out_dir=None,
              threshold: float = 0.9) -> list[dict]:
    """Per-cell metrics; with ``out_dir`` also writes the CSV/JSON report bundle.

    Output ordering depends only on the records' content, so repeated calls
    produce identical files.
    """
    groups = defaultdict(list)
    for r in records:
        groups[r.cell].append(r)
    order = {s: i for i, s in enumerate(config.systems)}
    alg_order = {a: i for i, a in enumerate(config.algorithms)}
    fit_order = {f.label: i for i, f in enumerate(config.fitness)}

    def sort_key(cell):
        system, alg, fit, snr = cell
        return (order.get(system, 99), system, alg_order.get(alg, 99), alg, fit_order.get(fit, 99), fit,
                -float("inf") if snr == "inf" else -snr)

    cells = []
    for key in sorted(groups, key=sort_key):
        recs = sorted(groups[key], key=lambda r: r.run)
        cells.append(summarize_cell(recs, config, threshold))

    if out_dir is not None:
        out = Path(out_dir)
        (out / "frequency").mkdir(parents=True, exist_ok=True)
        (out / "convergence").mkdir(parents=True, exist_ok=True)
        public = []
        by_system = defaultdict(list)
        for c in cells:
            name = cell_name(c["system"], c["algorithm"], c["fitness"], c["snr_db"])
            if "_table" in c:
                (out / "frequency" / f"{name}.csv").write_text(_frequency_csv(c, config))
                (out / "convergence" / f"{name}.csv").write_text(_convergence_csv(c))
            by_system[c["system"]].append(c)
            pub = {k: v for k, v in c.items() if not k.startswith("_")}
            (out / f"{name}.json").write_text(json.dumps(pub, indent=1, sort_keys=True) + "\n")
            public.append(pub)
        for system, cs in by_system.items():
            if any("system_nu" in c for c in cs):
                (out / f"table_{system}.csv").write_text(_system_table_csv(cs))
        (out / "summary.json").write_text(json.dumps(public, indent=1, sort_keys=True) + "\n")
    return cells
