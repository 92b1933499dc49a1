"""Correlation-scale covariance models and covariance estimation."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg as sla

from . import linalg
from .errors import DegenerateCovariance, DegenerateData, NotPositiveDefinite


@dataclass(frozen=True, eq=False)
class CovModel:
    """Symmetric positive-definite matrix plus a lazily cached Cholesky factor.

    The matrix is symmetrised on construction. Use :meth:`from_covariance`
    to rescale an arbitrary covariance to unit diagonal.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = linalg.symmetrize(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_covariance(cls, cov) -> "CovModel":
        return cls(cov_to_corr(cov))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        try:
            return linalg.cholesky(self.matrix)
        except NotPositiveDefinite as exc:
            raise DegenerateCovariance("covariance is not positive definite") from exc

    @cached_property
    def lambda_min(self) -> float:
        return linalg.min_eigenvalue(self.matrix)

    def solve(self, b) -> np.ndarray:
        """``Sigma^{-1} b`` through the cached factor."""
        return sla.cho_solve((self.chol, True), b, check_finite=False)

    def is_unit_diagonal(self, tol: float = 1e-8) -> bool:
        return bool(np.max(np.abs(np.diag(self.matrix) - 1.0)) <= tol)

    def submodel(self, idx) -> "CovModel":
        idx = np.asarray(idx)
        return CovModel(self.matrix[np.ix_(idx, idx)])


def as_cov(sigma) -> CovModel:
    return sigma if isinstance(sigma, CovModel) else CovModel(np.asarray(sigma, dtype=float))


def cov_to_corr(cov) -> np.ndarray:
    cov = linalg.symmetrize(cov)
    sd = np.sqrt(np.diag(cov))
    if np.any(sd <= 0):
        raise DegenerateData("covariance has a non-positive diagonal entry")
    out = cov / np.outer(sd, sd)
    np.fill_diagonal(out, 1.0)
    return out


def equicorrelated(p: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def ar1(rhos) -> np.ndarray:
    """Gaussian Markov chain correlation: ``Sigma_jk = prod_{i=j+1}^{k} rho_i``.

    ``rhos`` has length ``p``; its first entry is ignored.
    """
    rhos = np.asarray(rhos, dtype=float)
    p = rhos.shape[0]
    out = np.eye(p)
    for j in range(p):
        acc = 1.0
        for k in range(j + 1, p):
            acc *= rhos[k]
            out[j, k] = out[k, j] = acc
    return out


def block_diagonal(*blocks) -> np.ndarray:
    return sla.block_diag(*[np.asarray(b, dtype=float) for b in blocks])


def floor_eigenvalues(sigma, floor: float = 1e-3) -> np.ndarray:
    """Shift ``Sigma`` by ``(floor - lambda_min) I`` when needed, then rescale to unit diagonal."""
    sigma = linalg.symmetrize(sigma)
    lam = float(np.linalg.eigvalsh(sigma)[0])
    if lam < floor:
        sigma = sigma + (floor - lam) * np.eye(sigma.shape[0])
    return cov_to_corr(sigma)


def ledoit_wolf_shrinkage(X) -> tuple[np.ndarray, float]:
    """Ledoit & Wolf (2004) shrinkage towards ``mu * I`` with ``mu = tr(S) / p``.

    Returns the shrunk covariance and the shrinkage intensity. ``X`` is
    centred column-wise; the sample covariance uses divisor ``n``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    Xc = X - X.mean(axis=0)
    emp = Xc.T @ Xc / n
    mu = np.trace(emp) / p
    delta2 = np.sum((emp - mu * np.eye(p)) ** 2) / p
    X2 = Xc**2
    beta2 = (np.sum(X2.T @ X2) / n - np.sum(emp**2)) / (n * p)
    beta2 = min(beta2, delta2)
    shrink = 0.0 if delta2 == 0 else beta2 / delta2
    return shrink * mu * np.eye(p) + (1.0 - shrink) * emp, float(shrink)


def estimate_covariance(X, method: str = "mle") -> CovModel:
    """Estimate a unit-diagonal covariance from the rows of ``X``.

    ``mle`` is the sample covariance with divisor ``n``; ``ledoit_wolf``
    shrinks it towards a scaled identity.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateData("need a 2-d array with at least two rows")
    if np.any(np.ptp(X, axis=0) == 0):
        raise DegenerateData("a column has zero variance")
    if method == "mle":
        Xc = X - X.mean(axis=0)
        cov = Xc.T @ Xc / X.shape[0]
    elif method == "ledoit_wolf":
        cov, _ = ledoit_wolf_shrinkage(X)
    else:
        raise ValueError(f"unknown covariance estimator {method!r}")
    return CovModel(cov_to_corr(cov))
