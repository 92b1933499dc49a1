"""Knockoff samplers: Gaussian model-X, second-order and fixed-X."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .covariance import CovModel, as_cov
from .errors import (
    IndexOutOfRange,
    InfeasibleS,
    InsufficientRows,
    InvalidParams,
    RankDeficientX,
)
from .rng import RngStream, as_generator
from .smatrix import SMatrix

KINDS = ("model_x", "second_order", "fixed_x")
NEG_EIG_TOL = 1e-8
# eigenvalues of the conditional covariance below this fraction of the
# largest are treated as exact zeros
REL_EIG_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class KnockoffDataset:
    X: np.ndarray = field(repr=False)
    X_knock: np.ndarray = field(repr=False)
    kind: str
    s_used: SMatrix

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Xk = np.asarray(self.X_knock, dtype=float)
        if X.ndim != 2 or X.shape != Xk.shape:
            raise InvalidParams(f"shape mismatch: X {X.shape}, X_knock {Xk.shape}")
        if self.kind not in KINDS:
            raise InvalidParams(f"unknown knockoff kind {self.kind!r}")
        if len(self.s_used) != X.shape[1]:
            raise InvalidParams("s_used length does not match the number of columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "X_knock", Xk)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def augmented(self) -> np.ndarray:
        """``[X, X_knock]`` as one ``n x 2p`` matrix."""
        return np.hstack([self.X, self.X_knock])

    def gram_residual(self) -> float:
        """Max-abs gap between the augmented Gram matrix and ``G_S`` built from ``X^T X``."""
        M = self.augmented()
        sigma = self.X.T @ self.X
        off = sigma - np.diag(self.s_used.s)
        G = np.block([[sigma, off], [off, sigma]])
        return float(np.max(np.abs(M.T @ M - G)))


def _as_smatrix(s) -> SMatrix:
    return s if isinstance(s, SMatrix) else SMatrix(np.asarray(s, dtype=float))


def _conditional_moments(cov: CovModel, s: np.ndarray):
    """Return ``A = Sigma^{-1} S`` and a factor ``C`` with ``C^T C = 2S - S Sigma^{-1} S``."""
    A = cov.solve(np.diag(s))
    V = 2.0 * np.diag(s) - s[:, None] * A
    V = 0.5 * (V + V.T)
    w, Q = np.linalg.eigh(V)
    if w[0] < -NEG_EIG_TOL:
        raise InfeasibleS(f"conditional covariance has eigenvalue {w[0]:.3g}")
    top = max(w[-1], 0.0)
    w = np.where(w > REL_EIG_CUTOFF * top, w, 0.0)
    C = np.sqrt(w)[:, None] * Q.T
    return A, C


def _check_inputs(X, sigma, s):
    X = np.asarray(X, dtype=float)
    cov = as_cov(sigma)
    s = _as_smatrix(s)
    if X.ndim != 2 or X.shape[1] != cov.dim or len(s) != cov.dim:
        raise InvalidParams("X, Sigma and s dimensions disagree")
    return X, cov, s


def sample_gaussian_mx(X, sigma, s, rng) -> KnockoffDataset:
    """Exact model-X knockoffs for rows ``X_i ~ N(0, Sigma)``."""
    X, cov, s = _check_inputs(X, sigma, s)
    A, C = _conditional_moments(cov, s.s)
    Z = as_generator(rng).standard_normal(X.shape)
    Xk = X - X @ A + Z @ C
    return KnockoffDataset(X, Xk, "model_x", s)


def sample_second_order(X, sigma_hat, s, rng) -> KnockoffDataset:
    """Knockoffs matching the first two sample moments of ``X``.

    Columns are centred by their sample means. When ``sigma_hat`` is on the
    correlation scale the columns are also divided by their sample standard
    deviations before applying the Gaussian formula and rescaled afterwards.
    """
    X, cov, s = _check_inputs(X, sigma_hat, s)
    mu = X.mean(axis=0)
    sd = X.std(axis=0) if cov.is_unit_diagonal() else np.ones(cov.dim)
    if np.any(sd == 0):
        raise InvalidParams("a column of X is constant")
    Zc = (X - mu) / sd
    A, C = _conditional_moments(cov, s.s)
    noise = as_generator(rng).standard_normal(X.shape)
    Xk = X - sd * (Zc @ A) + sd * (noise @ C)
    return KnockoffDataset(X, Xk, "second_order", s)


def construct_fixed_x(X, s, rng=None, tol: float = 1e-8) -> KnockoffDataset:
    """Fixed-X knockoffs satisfying ``[X, Xk]^T [X, Xk] = G_S`` with ``Sigma = X^T X``.

    ``X`` must have unit-norm columns. ``rng`` only picks which orthonormal
    complement of ``span(X)`` is used; any choice satisfies the identity.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2 * p:
        raise InsufficientRows(f"fixed-X knockoffs need n >= 2p, got n={n}, p={p}")
    if np.max(np.abs(np.sum(X * X, axis=0) - 1.0)) > tol:
        raise InvalidParams("columns of X must have unit Euclidean norm")
    s = _as_smatrix(s)
    if len(s) != p:
        raise InvalidParams("s length does not match the number of columns")
    R = sla.qr(X, mode="r", pivoting=False)[0]
    if np.min(np.abs(np.diag(R))) <= 1e-10 * max(1.0, np.max(np.abs(np.diag(R)))):
        raise RankDeficientX("X does not have full column rank")
    sigma = X.T @ X
    A, C = _conditional_moments(CovModel(sigma), s.s)
    rand = as_generator(RngStream(0) if rng is None else rng).standard_normal((n, p))
    Q, _ = np.linalg.qr(np.hstack([X, rand]))
    U = Q[:, p:]
    # second pass against span(X) guards against loss of orthogonality
    U = U - X @ np.linalg.solve(sigma, X.T @ U)
    U, _ = np.linalg.qr(U)
    Xk = X - X @ A + U @ C
    return KnockoffDataset(X, Xk, "fixed_x", s)


def swap_columns(ds: KnockoffDataset, J) -> KnockoffDataset:
    """Exchange columns ``j in J`` of ``X`` and ``X_knock``."""
    J = np.unique(np.asarray(list(J), dtype=int))
    if J.size and (J.min() < 0 or J.max() >= ds.p):
        raise IndexOutOfRange(f"swap indices must lie in [0, {ds.p})")
    X = ds.X.copy()
    Xk = ds.X_knock.copy()
    X[:, J], Xk[:, J] = ds.X_knock[:, J], ds.X[:, J]
    return KnockoffDataset(X, Xk, ds.kind, ds.s_used)
