"""Command-line entry point: ``mrcknock {smatrix,sample,filter,simulate}``.

Matrices are comma-delimited text, one row per line. Vectors may be stored
as a single row or a single column.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import sim
from .config import load_config
from .errors import ConfigError, InvalidKind, InvalidParams, KnockoffError
from .filter import knockoff_threshold
from .rng import RngStream
from .samplers import construct_fixed_x, sample_gaussian_mx, sample_second_order
from .smatrix import SolverOptions, approx_then_linesearch, scale_smatrix, solve_smatrix
from .stats import STATISTICS, compute_statistic

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_FAILED_REPS = 0, 1, 2, 3


class UsageError(Exception):
    pass


def read_matrix(path) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if not np.all(np.isfinite(data)):
        raise UsageError(f"{path} contains non-finite values")
    return data


def read_vector(path) -> np.ndarray:
    data = read_matrix(path)
    if min(data.shape) != 1:
        raise UsageError(f"{path} should hold a vector, found shape {data.shape}")
    return data.ravel()


def write_matrix(path, M, header: str | None = None) -> None:
    M = np.atleast_2d(M)
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_smatrix(args) -> int:
    sigma = read_matrix(args.sigma)
    method = sim.METHOD_ALIASES.get(args.method, args.method)
    if args.block_size is not None:
        if method not in ("mvr", "maxent"):
            raise UsageError("--block-size applies to mvr and maxent only")
        s = approx_then_linesearch(sigma, args.block_size, method, SolverOptions())
    else:
        s = solve_smatrix(sigma, method, SolverOptions())
    if args.gamma is not None:
        s = scale_smatrix(s, args.gamma)
    write_matrix(args.out, np.asarray(s.s)[:, None])
    return EXIT_OK


def cmd_sample(args) -> int:
    X = read_matrix(args.x)
    s = read_vector(args.s)
    rng = RngStream(args.seed)
    if args.kind == "fixedx":
        ds = construct_fixed_x(X, s, rng)
    else:
        sigma = read_matrix(args.sigma) if args.sigma else None
        if sigma is None:
            raise UsageError(f"--sigma is required for --kind {args.kind}")
        sampler = sample_gaussian_mx if args.kind == "mx" else sample_second_order
        ds = sampler(X, sigma, s, rng)
    write_matrix(args.out, ds.X_knock)
    return EXIT_OK


def cmd_filter(args) -> int:
    X = read_matrix(args.x)
    Xk = read_matrix(args.xk)
    y = read_vector(args.y)
    if X.shape != Xk.shape:
        raise UsageError("X and X_knock must have the same shape")
    W = compute_statistic(args.stat, np.hstack([X, Xk]), y, rng=RngStream(args.seed).generator())
    sel = knockoff_threshold(W.w, args.q)
    header = f"# threshold={sel.threshold!r} selected={','.join(map(str, sel.selected))}"
    rows = np.column_stack([np.arange(W.w.size), W.w])
    with open(args.out, "w") as fh:
        fh.write(header + "\n")
        for j, w in rows:
            fh.write(f"{int(j)},{float(w)!r}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, base_seed=args.seed)
    records = sim.run_experiment(cfg, threads=args.threads)
    sim.emit_csv(records, args.out, timing=not args.no_timing)
    failed = [r for r in records if r.failed]
    for r in failed:
        print(f"replication {r.replication} ({r.method}, q={r.q}) failed: {r.error}", file=sys.stderr)
    return EXIT_FAILED_REPS if failed else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrcknock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smatrix", help="solve for the knockoff S-matrix diagonal")
    p.add_argument("--sigma", required=True, help="correlation matrix file")
    p.add_argument("--method", required=True, choices=["mvr", "maxent", "me", "sdp", "equi"])
    p.add_argument("--block-size", type=int, help="block-diagonal approximation plus line search")
    p.add_argument("--gamma", type=float, help="shrink the solution by this factor in [0, 1]")
    p.add_argument("--out", required=True, help="output file, one s_j per line")
    p.set_defaults(func=cmd_smatrix)

    p = sub.add_parser("sample", help="draw knockoffs for a design matrix")
    p.add_argument("--x", required=True)
    p.add_argument("--sigma", help="covariance (mx) or estimated covariance (second)")
    p.add_argument("--s", required=True, help="S-matrix diagonal")
    p.add_argument("--kind", required=True, choices=["mx", "second", "fixedx"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("filter", help="feature statistics and knockoff selection")
    p.add_argument("--x", required=True)
    p.add_argument("--xk", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--stat", default="lcd", choices=STATISTICS)
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0, help="seeds the cross-validation folds")
    p.add_argument("--out", required=True, help="'# threshold=... selected=...' then index,W rows")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser(
        "simulate", help="run a Monte Carlo experiment from a TOML config",
        description="Binomial responses are supported, but every statistic is a linear-model "
                    "fit; no logistic statistics are provided.")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, help="overrides base_seed from the config")
    p.add_argument("--no-timing", action="store_true",
                   help="write runtime_ms as 0 so repeated runs give byte-identical files")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError, InvalidParams, InvalidKind) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KnockoffError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
