"""Dense symmetric linear-algebra kernels.

Everything here works on plain ``numpy`` arrays. Lower-triangular Cholesky
factors are the currency: solvers keep a factor of ``2*Sigma - diag(s)`` and
edit it with rank-one updates instead of refactorising.
"""
from __future__ import annotations

import numba
import numpy as np
from scipy import linalg as sla

from .errors import ConvergenceFailure, DowndateBreaksPD, NotPositiveDefinite

PIVOT_TOL = 1e-12


def symmetrize(A) -> np.ndarray:
    """Return ``(A + A.T) / 2`` as a float array, checking it is square."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    return 0.5 * (A + A.T)


def cholesky(A) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == A``.

    Raises
    ------
    NotPositiveDefinite
        If any pivot (squared diagonal entry of ``L``) is at most ``1e-12``.
    """
    A = symmetrize(A)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    d = np.diag(L)
    if not np.all(np.isfinite(d)) or np.min(d * d) <= PIVOT_TOL:
        raise NotPositiveDefinite(f"pivot below {PIVOT_TOL:g}")
    return L


def is_positive_definite(A) -> bool:
    try:
        cholesky(A)
    except NotPositiveDefinite:
        return False
    return True


@numba.njit(cache=True, nogil=True)
def _rank1_inplace(L, x, sign, start):
    # Givens (sign=+1) or hyperbolic (sign=-1) rotations; x is destroyed.
    # Returns False if a downdate pivot drops to PIVOT_TOL or below.
    p = L.shape[0]
    for k in range(start, p):
        xk = x[k]
        if xk == 0.0:
            continue
        lkk = L[k, k]
        r2 = lkk * lkk + sign * xk * xk
        if r2 <= 1e-12:
            return False
        r = np.sqrt(r2)
        c = r / lkk
        s = xk / lkk
        L[k, k] = r
        for i in range(k + 1, p):
            L[i, k] = (L[i, k] + sign * s * x[i]) / c
            x[i] = c * x[i] - s * L[i, k]
    return True


def chol_rank1(L, v, direction: str = "update") -> np.ndarray:
    """Factor of ``L @ L.T + v v^T`` (update) or ``L @ L.T - v v^T`` (downdate).

    The input factor is left untouched.
    """
    if direction not in ("update", "downdate"):
        raise ValueError("direction must be 'update' or 'downdate'")
    out = np.array(L, dtype=float, order="C")
    x = np.array(v, dtype=float).ravel()
    if out.ndim != 2 or x.shape[0] != out.shape[0]:
        raise ValueError("dimension mismatch between factor and vector")
    sign = 1.0 if direction == "update" else -1.0
    if not _rank1_inplace(out, x, sign, 0):
        raise DowndateBreaksPD("downdate would make the matrix non positive definite")
    return out


def diag_step_inplace(L: np.ndarray, j: int, delta: float) -> None:
    """Refactor in place after ``A <- A - delta * e_j e_j^T``.

    Used by the coordinate solvers: raising ``s_j`` by ``delta`` lowers the
    ``(j, j)`` entry of ``2 Sigma - S``. Raises ``DowndateBreaksPD`` (and
    leaves ``L`` partially modified) if the result would not be PD.
    """
    if delta == 0.0:
        return
    x = np.zeros(L.shape[0])
    x[j] = np.sqrt(abs(delta))
    sign = -1.0 if delta > 0 else 1.0
    if not _rank1_inplace(L, x, sign, j):
        raise DowndateBreaksPD(f"step {delta:g} at coordinate {j} breaks positive definiteness")


def tri_solve(L, b, side: str = "lower") -> np.ndarray:
    """Solve ``L x = b`` (side='lower') or ``L.T x = b`` (side='upper')."""
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    return sla.solve_triangular(L, b, lower=True, trans=0 if side == "lower" else 1, check_finite=False)


def chol_solve(L, b) -> np.ndarray:
    """Solve ``(L L^T) x = b`` by forward then backward substitution."""
    return tri_solve(L, tri_solve(L, b, "lower"), "upper")


def gershgorin_bounds(A) -> tuple[float, float]:
    A = np.asarray(A, dtype=float)
    d = np.diag(A)
    radius = np.abs(A).sum(axis=1) - np.abs(d)
    return float(np.min(d - radius)), float(np.max(d + radius))


def min_eigenvalue(A, tol: float = 1e-11, max_iter: int = 200) -> float:
    """Smallest eigenvalue of a symmetric matrix by bisection.

    The bracket starts from the Gershgorin lower bound and the smallest
    diagonal entry; each step asks whether ``A - lam I`` admits a Cholesky
    factorisation.
    """
    A = symmetrize(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    lo, _ = gershgorin_bounds(A)
    hi = float(np.min(np.diag(A)))
    lo = min(lo, hi)
    eye = np.eye(A.shape[0])
    scale = max(1.0, abs(lo), abs(hi))
    for _ in range(max_iter):
        if hi - lo <= tol * scale:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if is_positive_definite(A - mid * eye):
            lo = mid
        else:
            hi = mid
    raise ConvergenceFailure("bisection for the minimum eigenvalue did not converge")
