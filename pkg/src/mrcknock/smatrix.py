"""Diagonal S-matrices for Gaussian knockoffs.

Given a correlation matrix ``Sigma`` the joint covariance of features and
knockoffs is ``G_S = [[Sigma, Sigma - S], [Sigma - S, Sigma]]`` with
``S = diag(s)``; it is PSD iff ``0 <= S <= 2 Sigma``. The solvers below pick
``s`` under four criteria:

* ``mvr``    -- minimise ``Tr(G_S^{-1})`` (minimum variance-based reconstructability)
* ``maxent`` -- minimise ``log det(G_S^{-1})`` (maximum entropy)
* ``sdp``    -- minimise the mean absolute feature/knockoff correlation
* ``equi``   -- the best constant ``s``

The coordinate solvers keep a Cholesky factor of ``D = 2 Sigma - S`` and edit
it with rank-one updates, so one sweep costs ``O(p^3)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg as sla

from . import linalg
from .covariance import CovModel, as_cov
from .errors import (
    DegenerateCovariance,
    NoFeasibleGamma,
    NoRootInInterval,
    NotPositiveDefinite,
    StepInfeasible,
)

DEGENERATE_TOL = 1e-10
METHODS = ("mvr", "maxent", "sdp", "equi")


@dataclass(frozen=True)
class SolverOptions:
    n_iter: int = 50
    converge_tol: float = 1e-5
    slack: float = 1e-5

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if self.converge_tol <= 0:
            raise ValueError("converge_tol must be positive")
        # slack = 0 is allowed so the exact PSD boundary can be studied
        if not 0 <= self.slack < 1:
            raise ValueError("slack must lie in [0, 1)")


@dataclass(frozen=True)
class SMatrix:
    s: np.ndarray
    slack: float = 0.0
    method: str = ""
    n_sweeps: int = 0

    def __post_init__(self):
        s = np.array(self.s, dtype=float).ravel()
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("S-matrix entries must be finite and nonnegative")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def sigma_dim(self) -> int:
        return self.s.shape[0]

    @property
    def S(self) -> np.ndarray:
        return np.diag(self.s)

    def __len__(self):
        return self.sigma_dim


@dataclass(frozen=True)
class LossReport:
    mvr: float
    maxent: float
    mac: float


def _as_s(s) -> np.ndarray:
    return np.asarray(s.s if isinstance(s, SMatrix) else s, dtype=float).ravel()


def gram_matrix(sigma, s) -> np.ndarray:
    """Joint feature/knockoff covariance ``G_S``."""
    sig = as_cov(sigma).matrix
    off = sig - np.diag(_as_s(s))
    return np.block([[sig, off], [off, sig]])


def feasibility_margin(sigma, s) -> float:
    """``min(lambda_min(2 Sigma - S), min_j s_j)``; nonnegative iff ``G_S`` is PSD."""
    sig = as_cov(sigma).matrix
    s = _as_s(s)
    return min(float(np.linalg.eigvalsh(2 * sig - np.diag(s))[0]), float(np.min(s)))


def is_feasible(sigma, s, tol: float = 1e-8) -> bool:
    return feasibility_margin(sigma, s) >= -tol


def count_small_eigenvalues(sigma, s, tol: float = 1e-6) -> int:
    """Number of eigenvalues of ``G_S`` below ``tol`` (rank-degeneracy diagnostic)."""
    return int(np.sum(np.linalg.eigvalsh(gram_matrix(sigma, s)) < tol))


def _check_sigma(sigma) -> CovModel:
    cov = as_cov(sigma)
    if cov.lambda_min <= DEGENERATE_TOL:
        raise DegenerateCovariance(f"lambda_min(Sigma) = {cov.lambda_min:.3g} is numerically zero")
    return cov


def _factor_d(sig: np.ndarray, s: np.ndarray) -> np.ndarray:
    try:
        return np.array(linalg.cholesky(2 * sig - np.diag(s)), order="C")
    except NotPositiveDefinite as exc:
        raise DegenerateCovariance("2 Sigma - S is not positive definite") from exc


def _inv_diag_entry(L: np.ndarray, j: int) -> tuple[np.ndarray, float]:
    """``v = L^{-1} e_j`` and ``c_d = (D^{-1})_{jj} = ||v||^2``.

    ``v`` vanishes above index ``j`` so only the trailing block is solved.
    """
    p = L.shape[0]
    v = np.zeros(p)
    rhs = np.zeros(p - j)
    rhs[0] = 1.0
    v[j:] = sla.solve_triangular(L[j:, j:], rhs, lower=True, check_finite=False)
    return v, float(v[j:] @ v[j:])


# --------------------------------------------------------------------------
# equicorrelated / constant s


def solve_equicorrelated(sigma, opts: SolverOptions | None = None) -> SMatrix:
    opts = opts or SolverOptions()
    cov = _check_sigma(sigma)
    value = min(2.0 * cov.lambda_min, 1.0) * (1.0 - opts.slack)
    return SMatrix(np.full(cov.dim, value), slack=opts.slack, method="equi")


# --------------------------------------------------------------------------
# MVR


def mvr_coordinate_root(c_n: float, c_d: float, s_jj: float) -> float:
    """Minimiser of ``1/(s_jj + d) - d c_n / (1 - d c_d)`` over ``-s_jj < d < 1/c_d``.

    The stationarity condition is the quadratic
    ``(-c_n - c_d^2) d^2 + 2(-c_n s_jj + c_d) d + (-c_n s_jj^2 - 1) = 0``;
    exactly one of its roots lies inside the interval.
    """
    if not (c_n < 0 and c_d > 0 and s_jj > 0):
        raise NoRootInInterval(f"invalid coefficients c_n={c_n}, c_d={c_d}, s={s_jj}")
    a = -c_n - c_d * c_d
    b = 2.0 * (-c_n * s_jj + c_d)
    c = -c_n * s_jj * s_jj - 1.0
    lo, hi = -s_jj, 1.0 / c_d
    if abs(a) < 1e-14:
        candidates = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0:
            raise NoRootInInterval("quadratic has no real root")
        # numerically stable pair of roots
        q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
        candidates = [q / a, c / q] if q != 0 else [0.0]
    inside = [r for r in candidates if lo < r < hi]
    if not inside:
        raise NoRootInInterval(f"no root of the MVR condition in ({lo}, {hi})")
    return float(inside[0])


def _coordinate_solver(cov: CovModel, opts: SolverOptions, update, method: str,
                       callback: Optional[Callable[[int, np.ndarray], None]]) -> SMatrix:
    sig = cov.matrix
    p = cov.dim
    s = np.full(p, cov.lambda_min)
    L = _factor_d(sig, s)
    sweeps = 0
    for sweeps in range(1, opts.n_iter + 1):
        max_step = 0.0
        for j in range(p):
            v, c_d = _inv_diag_entry(L, j)
            delta = update(L, v, c_d, s[j], j)
            if not (-s[j] < delta < 1.0 / c_d):
                raise StepInfeasible(f"step {delta} at coordinate {j} is infeasible")
            linalg.diag_step_inplace(L, j, delta)
            s[j] += delta
            max_step = max(max_step, abs(delta))
            if callback is not None:
                callback(j, s.copy())
        if max_step < opts.converge_tol:
            break
    return SMatrix(s, slack=opts.slack, method=method, n_sweeps=sweeps)


def solve_mvr(sigma, opts: SolverOptions | None = None, callback=None) -> SMatrix:
    """Coordinate descent on ``Tr(S^{-1}) + Tr((2 Sigma - S)^{-1})``.

    Starts at ``S = lambda_min(Sigma) I``. ``callback(j, s)`` is invoked after
    each coordinate update.
    """
    opts = opts or SolverOptions()
    cov = _check_sigma(sigma)

    def update(L, v, c_d, s_j, j):
        vn = sla.solve_triangular(L, v, lower=True, trans=1, check_finite=False)
        c_n = -float(vn @ vn)
        return mvr_coordinate_root(c_n, c_d, s_j)

    return _coordinate_solver(cov, opts, update, "mvr", callback)


def solve_maxent(sigma, opts: SolverOptions | None = None, callback=None) -> SMatrix:
    """Coordinate descent on ``-log det S - log det(2 Sigma - S)``.

    Each step sets ``s_j = (2 Sigma_jj - c_m) / 2`` with
    ``c_m = D_{-j,j}^T D_{-j,-j}^{-1} D_{-j,j}``; from the running factor,
    ``2 Sigma_jj - c_m = s_j + 1 / (D^{-1})_{jj}``.
    """
    opts = opts or SolverOptions()
    cov = _check_sigma(sigma)

    def update(L, v, c_d, s_j, j):
        return 0.5 * (s_j + 1.0 / c_d) - s_j

    return _coordinate_solver(cov, opts, update, "maxent", callback)


def schur_bound(sigma, s, j: int) -> float:
    """Largest feasible ``s_j`` holding the others fixed: ``2 Sigma_jj - c_m``."""
    sig = as_cov(sigma).matrix
    s = _as_s(s)
    D = 2 * sig - np.diag(s)
    idx = np.arange(sig.shape[0]) != j
    b = D[idx, j]
    c_m = float(b @ np.linalg.solve(D[np.ix_(idx, idx)], b)) if idx.any() else 0.0
    return 2 * sig[j, j] - c_m


# --------------------------------------------------------------------------
# SDP (mean absolute correlation)


def _boundary_scale(sig: np.ndarray, s: np.ndarray) -> float:
    """Largest ``g`` with ``2 Sigma - g S >= 0`` (``inf`` if ``S = 0``)."""
    if not np.any(s > 0):
        return np.inf
    nu = sla.eigh(np.diag(s), 2 * sig, eigvals_only=True)[-1]
    return np.inf if nu <= 0 else 1.0 / nu


def _sdp_barrier_value(sig: np.ndarray, s: np.ndarray, mu: float) -> float:
    if np.any(s <= 0) or np.any(s >= 1):
        return -np.inf
    try:
        L = np.linalg.cholesky(2 * sig - np.diag(s))
    except np.linalg.LinAlgError:
        return -np.inf
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(np.sum(s) + mu * (logdet + np.sum(np.log(s)) + np.sum(np.log1p(-s))))


def solve_sdp(sigma, opts: SolverOptions | None = None, callback=None,
              mu_init: float = 0.1, mu_decay: float = 0.2, gap_tol: float = 1e-10) -> SMatrix:
    """Maximise ``sum(s)`` subject to ``0 <= s <= 1`` and ``diag(s) <= 2 Sigma``.

    Log-barrier path following: for a decreasing sequence of ``mu`` the
    concave objective ``sum(s) + mu [log det(2 Sigma - S) + sum log s +
    sum log(1 - s)]`` is maximised by damped Newton steps, using the
    Cholesky factor of ``2 Sigma - S`` for the gradient ``1 - mu diag(D^{-1})
    + ...`` and Hessian ``-mu D^{-1} * D^{-1} - ...``. The loop stops once the
    barrier gap bound ``3 p mu`` falls below ``gap_tol``. A final uniform
    rescaling moves ``s`` onto the PSD boundary (or the cap at 1), less the
    ``slack`` fraction. ``opts.n_iter`` caps Newton steps per barrier level;
    ``callback(level, s)`` runs at the end of each level.
    """
    opts = opts or SolverOptions()
    cov = _check_sigma(sigma)
    sig = cov.matrix
    p = cov.dim
    s = np.full(p, min(cov.lambda_min, 0.5))
    mu = mu_init
    level = 0
    while True:
        level += 1
        for _ in range(opts.n_iter):
            L = np.linalg.cholesky(2 * sig - np.diag(s))
            Dinv = sla.cho_solve((L, True), np.eye(p), check_finite=False)
            grad = 1.0 - mu * np.diag(Dinv) + mu / s - mu / (1.0 - s)
            neg_hess = mu * Dinv**2
            neg_hess[np.diag_indices(p)] += mu / s**2 + mu / (1.0 - s) ** 2
            step = np.linalg.solve(neg_hess, grad)
            decrement = float(grad @ step)
            if decrement < 2e-12:
                break
            f0 = _sdp_barrier_value(sig, s, mu)
            t = 1.0
            while _sdp_barrier_value(sig, s + t * step, mu) < f0 + 0.25 * t * decrement:
                t *= 0.5
                if t < 1e-12:
                    break
            if t < 1e-12:
                break
            s = s + t * step
        if callback is not None:
            callback(level, s.copy())
        if 3 * p * mu < gap_tol:
            break
        mu *= mu_decay
    cap = 1.0 / np.max(s)
    g = min(_boundary_scale(sig, s), cap)
    s = s * g * (1.0 - opts.slack)
    return SMatrix(np.clip(s, 0.0, None), slack=opts.slack, method="sdp", n_sweeps=level)


# --------------------------------------------------------------------------
# dispatch, scaling, block structure


def solve_smatrix(sigma, method: str, opts: SolverOptions | None = None) -> SMatrix:
    solvers = {
        "mvr": solve_mvr,
        "maxent": solve_maxent,
        "sdp": solve_sdp,
        "equi": solve_equicorrelated,
    }
    if method not in solvers:
        raise ValueError(f"unknown S-matrix method {method!r}; expected one of {METHODS}")
    return solvers[method](sigma, opts)


def scale_smatrix(s: SMatrix, gamma: float) -> SMatrix:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return SMatrix(gamma * _as_s(s), slack=getattr(s, "slack", 0.0),
                   method=getattr(s, "method", ""))


def solve_blockdiag(sigma_blocks: Sequence, method: str, opts: SolverOptions | None = None) -> SMatrix:
    """Solve each diagonal block independently and concatenate."""
    parts = [solve_smatrix(block, method, opts).s for block in sigma_blocks]
    slack = (opts or SolverOptions()).slack
    return SMatrix(np.concatenate(parts), slack=slack, method=method)


def _partition(p: int, block_partition) -> list[np.ndarray]:
    if isinstance(block_partition, (int, np.integer)):
        k = int(block_partition)
        return [np.arange(i, min(i + k, p)) for i in range(0, p, k)]
    blocks = [np.asarray(b, dtype=int).ravel() for b in block_partition]
    flat = np.sort(np.concatenate(blocks)) if blocks else np.array([], dtype=int)
    if not np.array_equal(flat, np.arange(p)):
        raise ValueError("block partition must cover every index exactly once")
    return blocks


def scaled_losses(sigma, s, gammas, method: str) -> np.ndarray:
    """Exact loss of ``gamma * S`` for each gamma; ``inf`` where infeasible.

    One generalised eigendecomposition of ``(2 Sigma, S)`` serves every gamma.
    """
    sig = as_cov(sigma).matrix
    s = _as_s(s)
    gammas = np.asarray(gammas, dtype=float)
    if np.any(s <= 0):
        raise DegenerateCovariance("line search needs strictly positive s")
    root = 1.0 / np.sqrt(s)
    T = 2 * sig * np.outer(root, root)
    lam, Q = np.linalg.eigh(T)
    weights = (Q**2 * (1.0 / s)[:, None]).sum(axis=0)
    out = np.full(gammas.shape, np.inf)
    for i, g in enumerate(gammas):
        if g <= 0 or g >= lam[0]:
            continue
        if method == "mvr":
            out[i] = np.sum(1.0 / (g * s)) + np.sum(weights / (lam - g))
        elif method == "maxent":
            out[i] = -np.sum(np.log(g * s)) - np.sum(np.log(s)) - np.sum(np.log(lam - g))
        else:
            raise ValueError("line search supports 'mvr' and 'maxent'")
    return out


def approx_then_linesearch(sigma, block_partition, method: str = "mvr",
                           opts: SolverOptions | None = None, n_grid: int = 100) -> SMatrix:
    """Block-diagonal approximation followed by a scalar line search.

    Step 1 solves the problem for ``Sigma`` restricted to the blocks; step 2
    returns ``gamma * S_approx`` with gamma minimising the exact loss on the
    grid ``{1/n_grid, ..., 1}`` among feasible values.
    """
    if method not in ("mvr", "maxent"):
        raise ValueError("method must be 'mvr' or 'maxent'")
    cov = as_cov(sigma)
    blocks = _partition(cov.dim, block_partition)
    approx = np.zeros(cov.dim)
    for idx in blocks:
        approx[idx] = solve_smatrix(cov.submodel(idx), method, opts).s
    gammas = np.arange(1, n_grid + 1) / n_grid
    losses = scaled_losses(cov, approx, gammas, method)
    if not np.any(np.isfinite(losses)):
        raise NoFeasibleGamma("no feasible scaling of the block-diagonal solution")
    gamma = float(gammas[int(np.argmin(losses))])
    slack = (opts or SolverOptions()).slack
    return SMatrix(gamma * approx, slack=slack, method=method)


# --------------------------------------------------------------------------
# losses


def loss_report(sigma, s) -> LossReport:
    """MVR loss ``Tr(G_S^{-1})``, ME loss ``log det(G_S^{-1})`` and MAC.

    Both losses split as a sum over ``S`` and ``2 Sigma - S``.
    """
    cov = as_cov(sigma)
    s = _as_s(s)
    if np.any(s <= 0):
        raise DegenerateCovariance("S is singular")
    L = _factor_d(cov.matrix, s)
    Linv = sla.solve_triangular(L, np.eye(cov.dim), lower=True, check_finite=False)
    mvr = float(np.sum(1.0 / s) + np.sum(Linv**2))
    maxent = float(-np.sum(np.log(s)) - 2.0 * np.sum(np.log(np.diag(L))))
    mac = float(np.mean(np.abs(1.0 - s)))
    return LossReport(mvr=mvr, maxent=maxent, mac=mac)
