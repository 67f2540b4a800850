"""Command line entry point: ``narx2d {gen-data,run,summarize,oracle}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..narx_core import DictionaryConfig, FitnessEvaluator, FitnessSpec
from ..records import bits_to_str
from ..systems import SYSTEMS, get_system, make_dataset
from .config import ExperimentConfig, dump_config, load_config
from .oracle import exhaustive_search
from .runner import execute, load_records, plan_runs
from .summary import summarize

RECORDS = "records.jsonl"
MANIFEST = "config.yaml"


def _snr(text):
    return None if text.lower() in ("none", "inf", "clean") else float(text)


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    systems = args.system or list(SYSTEMS)
    for name in systems:
        for snr in args.snr:
            rng = np.random.default_rng(args.seed)
            data = make_dataset(get_system(name), rng, n=args.n, snr_db=snr, amplitude=args.amplitude)
            label = "clean" if snr is None else f"{snr:g}dB"
            path = out / f"{name}_{label}.csv"
            data.to_csv(path)
            print(path)
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config.base_seed = args.seed
    if args.out:
        config.output_dir = args.out
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, out / MANIFEST)
    plan = plan_runs(config)
    records = execute(config, plan, workers=args.workers, records_path=out / RECORDS)
    failed = [r for r in records if r.status != "ok"]
    print(f"{len(records) - len(failed)}/{len(plan)} runs succeeded; records in {out / RECORDS}")
    if args.summarize:
        summarize(records, config, out / "summary")
    return 0 if not failed else 1


def cmd_summarize(args) -> int:
    run_dir = Path(args.run_dir)
    config = load_config(args.config or run_dir / MANIFEST)
    records = load_records(run_dir / RECORDS)
    if not records:
        print(f"no records in {run_dir / RECORDS}", file=sys.stderr)
        return 1
    out = Path(args.out) if args.out else run_dir / "summary"
    cells = summarize(records, config, out, threshold=args.threshold)
    for c in cells:
        status = "" if c["complete"] else f"  [incomplete: {c['runs']}/{c['expected_runs']} runs]"
        if "r" in c:
            print(f"{c['system']} {c['algorithm']} {c['fitness']} snr={c['snr_db']}: "
                  f"min system nu={min(c['system_nu']):.2f} r={c['r']:.2f} nu_max={c['nu_max']:.2f}{status}")
        else:
            print(f"{c['system']} {c['algorithm']} {c['fitness']} snr={c['snr_db']}: no successful runs{status}")
    print(f"summary written to {out}")
    return 0


def cmd_oracle(args) -> int:
    system = get_system(args.system)
    if args.n_y is not None or args.n_u is not None or args.degree is not None:
        import dataclasses
        cfg = DictionaryConfig(
            n_y=system.config.n_y if args.n_y is None else args.n_y,
            n_u=system.config.n_u if args.n_u is None else args.n_u,
            degree=system.config.degree if args.degree is None else args.degree,
        )
        system = dataclasses.replace(system, config=cfg)
    data = make_dataset(system, np.random.default_rng(args.seed), n=args.n, snr_db=args.snr,
                        validation_fraction=args.validation_fraction)
    spec = FitnessSpec.parse(args.fitness)
    evaluator = FitnessEvaluator(system.dictionary, data, spec, cache=False)
    res = exhaustive_search(evaluator, len(system.dictionary))
    report = {
        "system": system.name,
        "dictionary": {"n_y": system.config.n_y, "n_u": system.config.n_u,
                       "degree": system.config.degree, "n_terms": len(system.dictionary)},
        "fitness": spec.label,
        "snr_db": args.snr,
        "n_validation": data.n_validation,
        "seed": args.seed,
        "evaluations": res["evaluations"],
        "best": bits_to_str(res["best"]),
        "best_terms": system.dictionary.render(res["best"]),
        "best_fitness": res["best_fitness"],
        "true_terms": system.dictionary.render(system.true_structure),
        "true_fitness": float(evaluator(system.true_structure)),
    }
    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="narx2d", description="NARX structure selection with 2D particle swarms")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write synthetic datasets as CSV (k,u,y)")
    g.add_argument("--system", action="append", choices=sorted(SYSTEMS))
    g.add_argument("--snr", type=_snr, nargs="+", default=[None], help="SNR in dB, or 'none'")
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--amplitude", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="data")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="execute a sweep")
    r.add_argument("--config", help="YAML config file (defaults reproduce the full study)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--seed", type=int, help="base seed, unsigned 64-bit")
    r.add_argument("--summarize", action="store_true", help="also write the summary bundle")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="aggregate run records into tables")
    s.add_argument("run_dir")
    s.add_argument("--config", help="config file (default: RUN_DIR/config.yaml)")
    s.add_argument("--out", help="output directory (default: RUN_DIR/summary)")
    s.add_argument("--threshold", type=float, default=0.9)
    s.set_defaults(func=cmd_summarize)

    o = sub.add_parser("oracle", help="exhaustive search on a reduced dictionary")
    o.add_argument("--system", default="S1", choices=sorted(SYSTEMS))
    o.add_argument("--n-y", type=int, default=2)
    o.add_argument("--n-u", type=int, default=2)
    o.add_argument("--degree", type=int, default=2)
    o.add_argument("--n", type=int, default=667, help="record length (667 gives 200 validation samples)")
    o.add_argument("--validation-fraction", type=float, default=0.3)
    o.add_argument("--snr", type=_snr, default=None)
    o.add_argument("--fitness", default="BIC")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", help="write the JSON report here")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
