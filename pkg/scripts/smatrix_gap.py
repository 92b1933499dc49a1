"""How far apart are the MVR and ME solutions on equicorrelated designs as p grows?

Prints ||s_mvr - s_me||_inf and the common value 1 - rho for each (rho, p).
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from mrcknock.covariance import equicorrelated
from mrcknock.smatrix import solve_maxent, solve_mvr


@dataclass(frozen=True)
class GapConfig:
    ps: tuple = (10, 50, 200, 500)
    rhos: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)


def gaps(cfg: GapConfig) -> dict:
    out = {}
    for rho in cfg.rhos:
        for p in cfg.ps:
            sigma = equicorrelated(p, rho)
            mvr, me = solve_mvr(sigma).s, solve_maxent(sigma).s
            out[(rho, p)] = (float(np.max(np.abs(mvr - me))), float(mvr.mean()), float(me.mean()))
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ps", type=int, nargs="+", default=list(GapConfig.ps))
    ap.add_argument("--rhos", type=float, nargs="+", default=list(GapConfig.rhos))
    args = ap.parse_args(argv)
    cfg = GapConfig(tuple(args.ps), tuple(args.rhos))
    t0 = time.perf_counter()
    res = gaps(cfg)
    print(f"{'rho':>4} {'p':>5} {'gap':>10} {'s_mvr':>8} {'s_me':>8} {'1-rho':>6}")
    for (rho, p), (gap, a, b) in res.items():
        print(f"{rho:>4.1f} {p:>5d} {gap:>10.2e} {a:>8.4f} {b:>8.4f} {1 - rho:>6.2f}")
    for rho in cfg.rhos:
        seq = [res[(rho, p)][0] for p in cfg.ps]
        trend = "decreasing" if all(np.diff(seq) < 0) else "NOT decreasing"
        print(f"rho={rho}: gap {trend} in p")
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
