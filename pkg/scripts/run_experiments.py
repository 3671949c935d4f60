#!/usr/bin/env python3
"""Run benchmark configs and print a median-ESS table.

    python3 scripts/run_experiments.py                  # every config
    python3 scripts/run_experiments.py stiefel_w_sweep # selected ones
    python3 scripts/run_experiments.py --steps 2000     # quick smoke run

CSV and sidecar metadata go to ``scripts/results/`` unless --outdir is given.
"""
import argparse
import csv
import sys
from pathlib import Path

from geoslice.bench_cli import parse_config, run_experiment

HERE = Path(__file__).resolve().parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems under scripts/configs")
    ap.add_argument("--outdir", default=str(HERE / "results"))
    ap.add_argument("--steps", type=int, help="override n_steps")
    ap.add_argument("--reps", type=int, help="override n_repetitions")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    paths = sorted((HERE / "configs").glob("*.json"))
    if args.names:
        paths = [HERE / "configs" / f"{n.removesuffix('.json')}.json" for n in args.names]
    status = 0
    for path in paths:
        cfg = parse_config(path)
        cfg.output_path = str(Path(args.outdir) / f"{path.stem}.csv")
        if args.steps:
            cfg.n_steps = args.steps
        if args.reps:
            cfg.n_repetitions = args.reps
        code = run_experiment(cfg, workers=args.workers)
        status = max(status, code)
        with open(cfg.output_path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row["run"] == "summary":
                    knobs = " ".join(f"{k}={row[k]}" for k in ("lambda", "w", "m", "step") if row[k])
                    print(f"{path.stem:24s} {row['sampler']:8s} {knobs:28s} "
                          f"median ESS {float(row['ess']):10.1f}  ({float(row['wall_time_s']):.1f}s)")
    return status


if __name__ == "__main__":
    sys.exit(main())
