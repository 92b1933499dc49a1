"""Monte Carlo check that the OLS error on [X, X_knock] tracks Tr(G_S^{-1}).

For each S-matrix method the mean of ||beta_hat - (beta, 0)||^2 over many
datasets is compared with Tr(G_S^{-1}) / (n - 2p - 1).
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from mrcknock.covariance import CovModel, equicorrelated
from mrcknock.samplers import sample_gaussian_mx
from mrcknock.smatrix import loss_report, solve_smatrix
from mrcknock.stats import ols_coef


@dataclass(frozen=True)
class MSEConfig:
    p: int = 5
    n: int = 60
    rho: float = 0.3
    reps: int = 2000
    seed: int = 0
    methods: tuple = ("mvr", "maxent", "sdp", "equi")


def run(cfg: MSEConfig) -> dict:
    cov = CovModel(equicorrelated(cfg.p, cfg.rho))
    sols = {m: solve_smatrix(cov, m) for m in cfg.methods}
    beta = np.linspace(-1, 1, cfg.p)
    target = np.concatenate([beta, np.zeros(cfg.p)])
    errs = {m: np.empty(cfg.reps) for m in sols}
    for r in range(cfg.reps):
        g = np.random.default_rng([cfg.seed, r])
        X = g.standard_normal((cfg.n, cfg.p)) @ cov.chol.T
        y = X @ beta + g.standard_normal(cfg.n)
        for m, s in sols.items():
            ds = sample_gaussian_mx(X, cov, s, np.random.default_rng([cfg.seed, r, 1]))
            errs[m][r] = np.sum((ols_coef(ds, y) - target) ** 2)
    out = {}
    for m, s in sols.items():
        theory = loss_report(cov, s).mvr / (cfg.n - 2 * cfg.p - 1)
        e = errs[m]
        out[m] = (float(e.mean()), float(e.std(ddof=1) / np.sqrt(cfg.reps)), theory)
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f in ("p", "n", "reps", "seed"):
        ap.add_argument(f"--{f}", type=int, default=getattr(MSEConfig, f))
    ap.add_argument("--rho", type=float, default=MSEConfig.rho)
    args = ap.parse_args(argv)
    cfg = MSEConfig(args.p, args.n, args.rho, args.reps, args.seed)
    print(f"{'method':<8} {'monte carlo':>18} {'theory':>10} {'rel':>7}")
    for m, (mean, se, theory) in run(cfg).items():
        print(f"{m:<8} {mean:>10.4f} ({se:.4f}) {theory:>10.4f} {mean / theory - 1:>+7.3f}")


if __name__ == "__main__":
    main()
