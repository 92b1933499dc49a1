"""Run one TOML experiment, write the CSV and print power/FDR per method and level.

    python3 scripts/run_config.py scripts/configs/power_equi.toml --out power.csv
"""
from __future__ import annotations

import argparse
import dataclasses
import time

from mrcknock import sim
from mrcknock.config import load_config


def print_summary(records) -> None:
    rows = sim.summarize(records)
    print(f"{'method':<8} {'q':>5} {'power':>14} {'fdr':>14} {'reps':>5}")
    for (method, q), v in sorted(rows.items()):
        print(f"{method:<8} {q:>5.2f} {v['power']:>7.3f} ({v['power_se']:.3f}) "
              f"{v['fdr']:>7.3f} ({v['fdr_se']:.3f}) {v['n']:>5d}")
    failed = sum(r.failed for r in records)
    if failed:
        print(f"{failed} records failed")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default=None, help="CSV path (default: alongside the config name)")
    ap.add_argument("--replications", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    cfg = load_config(args.config)
    if args.replications:
        cfg = dataclasses.replace(cfg, replications=args.replications)
    t0 = time.perf_counter()
    records = sim.run_experiment(cfg, threads=args.threads)
    out = args.out or args.config.rsplit("/", 1)[-1].replace(".toml", ".csv")
    sim.emit_csv(records, out)
    print(f"config {cfg.config_hash()}: {cfg.replications} replications in "
          f"{time.perf_counter() - t0:.1f} s -> {out}")
    print_summary(records)


if __name__ == "__main__":
    main()
