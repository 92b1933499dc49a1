"""Feature importances on ``[X, X_knock]`` and antisymmetric W statistics.

Penalised fits divide each column of the augmented design by its root mean
square before fitting and map the coefficients back afterwards. There is no
intercept; callers are expected to supply centred data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import lasso
from .errors import InvalidParams, InvalidKind, RankDeficient
from .lasso import column_scale, fold_ids

STATISTICS = ("lcd", "ridge", "ols", "lsm")


@dataclass(frozen=True, eq=False)
class StatVector:
    w: np.ndarray
    statistic_name: str
    tuning: Mapping = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "tuning", MappingProxyType(dict(self.tuning)))

    def __len__(self):
        return self.w.shape[0]


def _design(ds, y):
    M = ds.augmented() if hasattr(ds, "augmented") else np.asarray(ds, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if M.shape[0] != y.shape[0]:
        raise InvalidParams(f"design has {M.shape[0]} rows but y has {y.shape[0]}")
    return M, y


def ols_coef(ds, y) -> np.ndarray:
    """Least-squares coefficients on ``[X, X_knock]``."""
    M, y = _design(ds, y)
    n, m = M.shape
    if n <= m:
        raise RankDeficient(f"OLS needs n > 2p (n={n}, 2p={m})")
    coef, _, rank, sv = np.linalg.lstsq(M, y, rcond=None)
    if rank < m or sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("augmented design is rank deficient")
    return coef


def _ridge_solutions(U, d, Vt, y, lambdas):
    """Rows: ridge coefficients ``(M'M + lam I)^{-1} M'y`` from a thin SVD of ``M``."""
    uy = U.T @ y
    shrink = d[None, :] / (d[None, :] ** 2 + lambdas[:, None])
    return (shrink * uy[None, :]) @ Vt


def default_ridge_grid(n: int, n_lambda: int = 100) -> np.ndarray:
    # columns have mean square 1 after scaling, so M'M is of order n
    return n * np.logspace(-4, 3, n_lambda)


def ridge_coef(ds, y, lambda_grid=None, cv_folds: int = 5, rng=None,
               standardize: bool = True) -> tuple[np.ndarray, dict]:
    """Ridge coefficients minimising ``||y - M b||^2 + lam ||b||^2`` at the CV-chosen ``lam``."""
    M, y = _design(ds, y)
    n = M.shape[0]
    lambdas = default_ridge_grid(n) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if lambdas.size == 0 or np.any(lambdas < 0):
        raise InvalidParams("ridge grid must be non-empty and nonnegative")
    scale = column_scale(M) if standardize else np.ones(M.shape[1])
    best = 0
    err = np.zeros(lambdas.size)
    if lambdas.size > 1:
        ids = fold_ids(n, cv_folds, rng)
        for f in range(cv_folds):
            train = ids != f
            sc = column_scale(M[train]) if standardize else scale
            U, d, Vt = np.linalg.svd(M[train] / sc, full_matrices=False)
            coefs = _ridge_solutions(U, d, Vt, y[train], lambdas) / sc
            err += np.sum((y[~train, None] - M[~train] @ coefs.T) ** 2, axis=0)
        best = int(np.argmin(err))
    U, d, Vt = np.linalg.svd(M / scale, full_matrices=False)
    coef = _ridge_solutions(U, d, Vt, y, lambdas[best:best + 1])[0] / scale
    return coef, {"lambda": float(lambdas[best]), "folds": cv_folds, "n_lambda": int(lambdas.size)}


def lasso_coef(ds, y, lambda_grid=None, cv_folds: int = 5, rng=None,
               standardize: bool = True) -> tuple[np.ndarray, dict]:
    """Cross-validated lasso, refit on the full data at the selected ``lam``."""
    M, y = _design(ds, y)
    coef, lam, lambdas, _ = lasso.cv_lasso(M, y, lambda_grid, cv_folds, rng, standardize)
    return coef, {"lambda": lam, "folds": cv_folds, "n_lambda": int(lambdas.size)}


def lcd_statistic(coef, statistic_name: str = "lcd", tuning=None) -> StatVector:
    """``W_j = |coef_j| - |coef_{j+p}|``."""
    coef = np.asarray(coef, dtype=float).ravel()
    if coef.size % 2:
        raise InvalidParams("coefficient vector must have even length 2p")
    p = coef.size // 2
    return StatVector(np.abs(coef[:p]) - np.abs(coef[p:]), statistic_name, tuning or {})


def lsm_statistic(ds, y, lambda_path=None, standardize: bool = True) -> StatVector:
    """Signed max of the entry points of each column along a lasso path.

    ``Z_j`` is the largest ``lam`` on the path at which coordinate ``j`` is
    nonzero, and ``W_j = max(Z_j, Z_{j+p}) * sign(Z_j - Z_{j+p})``.
    """
    M, y = _design(ds, y)
    scale = column_scale(M) if standardize else np.ones(M.shape[1])
    Ms = M / scale
    if lambda_path is None:
        lambda_path = lasso.default_lambda_grid(Ms, y)
    lambda_path = np.asarray(lambda_path, dtype=float)
    if lambda_path.size < 100:
        raise InvalidParams("the signed-max statistic needs a path of at least 100 values")
    path = lasso.lasso_path(Ms, y, lambda_path)
    nonzero = path != 0
    first = np.argmax(nonzero, axis=0)
    Z = np.where(nonzero.any(axis=0), lambda_path[first], 0.0)
    p = M.shape[1] // 2
    a, b = Z[:p], Z[p:]
    w = np.maximum(a, b) * np.sign(a - b)
    return StatVector(w, "lsm", {"n_lambda": int(lambda_path.size)})


def compute_statistic(kind: str, ds, y, rng=None, cv_folds: int = 5) -> StatVector:
    """Dispatch on ``kind`` in ``STATISTICS``."""
    if kind == "lcd":
        coef, tuning = lasso_coef(ds, y, cv_folds=cv_folds, rng=rng)
        return lcd_statistic(coef, "lcd", tuning)
    if kind == "ridge":
        coef, tuning = ridge_coef(ds, y, cv_folds=cv_folds, rng=rng)
        return lcd_statistic(coef, "ridge", tuning)
    if kind == "ols":
        return lcd_statistic(ols_coef(ds, y), "ols")
    if kind == "lsm":
        return lsm_statistic(ds, y)
    raise InvalidKind(f"unknown statistic {kind!r}; expected one of {STATISTICS}")
