"""Pure-l1 lasso by cyclic coordinate descent on the Gram matrix.

Objective: ``(1/2n) ||y - M b||^2 + lam ||b||_1``. Paths are solved in
decreasing ``lam`` with warm starts; each ``lam`` alternates full sweeps with
sweeps restricted to the active set until a full sweep moves nothing.

Near-saturated fits (many active columns, few rows) make plain coordinate
descent crawl, so restricted sweeps are interleaved with orthant steps: a
move towards the minimiser of the objective with the current signs frozen,
truncated at the first sign change. A Cholesky factor of the active block
of the Gram matrix is carried across steps and edited one column at a time.
"""
from __future__ import annotations

import numba
import numpy as np

from .errors import ConvergenceFailure, InvalidParams
from .rng import as_generator

MAX_PASSES = 1000
TOL = 1e-7
# restricted passes before orthant steps kick in
EXACT_FIRST = 2
# relative pivot below which the active block counts as singular
PIVOT_REL = 1e-7


@numba.njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True, nogil=True, fastmath=True)
def _sweep(G, grad, beta, lam, idx, n_idx):
    """One cyclic pass over ``idx[:n_idx]``; ``grad = c - G beta`` is kept current."""
    m = beta.shape[0]
    biggest = 0.0
    for t in range(n_idx):
        j = idx[t]
        gjj = G[j, j]
        if gjj <= 0.0:
            continue
        old = beta[j]
        new = _soft(grad[j] + gjj * old, lam) / gjj
        d = new - old
        if d != 0.0:
            beta[j] = new
            row = G[j]  # G is symmetric; rows are contiguous
            for k in range(m):
                grad[k] -= row[k] * d
            step = abs(d) * np.sqrt(gjj)
            if step > biggest:
                biggest = step
    return biggest


@numba.njit(cache=True, nogil=True)
def _objective(c, yy, beta, grad, lam):
    # beta' G beta = beta' (c - grad)
    quad = 0.0
    lin = 0.0
    l1 = 0.0
    for j in range(beta.shape[0]):
        quad += beta[j] * (c[j] - grad[j])
        lin += beta[j] * c[j]
        l1 += abs(beta[j])
    return 0.5 * (yy - 2.0 * lin + quad) + lam * l1


# The active-block factor lives in plain arrays: ``L[:k, :k]`` is the lower
# Cholesky factor of ``G[order[:k], order[:k]]``, ``pos[j]`` is the position
# of coordinate ``j`` in ``order`` (or -1) and ``state[0] = k``.


@numba.njit(cache=True, nogil=True)
def _factor_drop(L, order, pos, k, i):
    """Remove position ``i`` from a factor of size ``k``; returns the new size."""
    for r in range(i, k - 1):
        for col in range(r + 2):
            L[r, col] = L[r + 1, col]
        order[r] = order[r + 1]
        pos[order[r]] = r
    for r in range(i, k - 1):
        a = L[r, r]
        b = L[r, r + 1]
        h = np.hypot(a, b)
        cs = a / h
        sn = b / h
        for rho in range(r, k - 1):
            x = L[rho, r]
            y = L[rho, r + 1]
            L[rho, r] = cs * x + sn * y
            L[rho, r + 1] = -sn * x + cs * y
    for r in range(k):
        L[r, k - 1] = 0.0
    for col in range(k):
        L[k - 1, col] = 0.0
    return k - 1


@numba.njit(cache=True, nogil=True)
def _factor_add(G, L, order, pos, k, j):
    """Append coordinate ``j``; returns the new size, or -1 if the pivot collapses."""
    for u in range(k):
        acc = G[order[u], j]
        for v in range(u):
            acc -= L[u, v] * L[k, v]
        L[k, u] = acc / L[u, u]
    d2 = G[j, j]
    for v in range(k):
        d2 -= L[k, v] * L[k, v]
    if d2 <= (PIVOT_REL**2) * G[j, j]:
        for v in range(k):
            L[k, v] = 0.0
        return -1
    L[k, k] = np.sqrt(d2)
    order[k] = j
    pos[j] = k
    return k + 1


@numba.njit(cache=True, nogil=True)
def _sync_factor(G, beta, L, order, pos, k):
    """Drop zero coordinates from the factor and add nonzero ones where possible.

    Coordinates whose column is numerically dependent on the factored ones
    stay out; the orthant step then holds them fixed. Returns the new size.
    """
    i = k - 1
    while i >= 0:
        if beta[order[i]] == 0.0:
            pos[order[i]] = -1
            k = _factor_drop(L, order, pos, k, i)
        i -= 1
    for j in range(beta.shape[0]):
        if beta[j] != 0.0 and pos[j] < 0:
            grown = _factor_add(G, L, order, pos, k, j)
            if grown > 0:
                k = grown
    return k


@numba.njit(cache=True, nogil=True)
def _null_move(G, beta, grad, lam, L, order, k, j):
    """Step along ``d`` with ``d_j = 1``, ``d_B = -G_BB^{-1} G_Bj`` for a dependent column ``j``.

    ``d' G d`` is numerically zero, so along ``d`` the objective is linear
    up to rounding. The step goes downhill until a coordinate reaches zero.
    Returns True if it moved.
    """
    w = np.empty(k)
    for u in range(k):
        w[u] = G[order[u], j]
    for u in range(k):
        acc = w[u]
        for v in range(u):
            acc -= L[u, v] * w[v]
        w[u] = acc / L[u, u]
    for u in range(k - 1, -1, -1):
        acc = w[u]
        for v in range(u + 1, k):
            acc -= L[v, u] * w[v]
        w[u] = acc / L[u, u]
    # derivative of the objective along d; the curvature d'Gd passed the
    # pivot test as zero, so it is ignored
    slope = lam * np.sign(beta[j]) - grad[j]
    for u in range(k):
        i = order[u]
        slope -= (lam * np.sign(beta[i]) - grad[i]) * w[u]
    sigma = -1.0 if slope > 0 else 1.0
    t = np.inf
    hit = -2  # -1: coordinate j, u >= 0: block position u
    if beta[j] * sigma < 0.0:
        t = abs(beta[j])
        hit = -1
    for u in range(k):
        dv = -sigma * w[u]
        bi = beta[order[u]]
        if bi * dv < 0.0 and -bi / dv < t:
            t = -bi / dv
            hit = u
    if hit == -2:
        return False
    m = beta.shape[0]
    for u in range(k + 1):
        if u < k:
            i = order[u]
            new = 0.0 if u == hit else beta[i] - sigma * w[u] * t
        else:
            i = j
            new = 0.0 if hit == -1 else beta[j] + sigma * t
        d = new - beta[i]
        if d != 0.0:
            beta[i] = new
            row = G[i]
            for r in range(m):
                grad[r] -= row[r] * d
    return True


@numba.njit(cache=True, nogil=True)
def _orthant_step(G, c, beta, grad, lam, L, order, pos, state):
    """Exact minimisation over the factored block with signs frozen.

    With the signs of the block ``B`` fixed and the other coordinates held,
    the objective is quadratic in ``beta_B`` with minimiser ``b`` solving
    ``G_BB b = grad_B + G_BB beta_B - lam sign_B``. The iterate moves along
    the segment to ``b`` and stops at the first sign change, zeroing that
    coordinate, so the objective cannot increase. Returns 2 if ``b`` was
    reached, 1 after a partial step and 0 if the block is empty.
    ``state[0]`` holds the factor size.
    """
    k = _sync_factor(G, beta, L, order, pos, state[0])
    state[0] = k
    if k == 0:
        return 0
    for j in range(beta.shape[0]):
        if beta[j] != 0.0 and pos[j] < 0:
            if _null_move(G, beta, grad, lam, L, order, k, j):
                return 1
            break
    b = np.empty(k)
    for u in range(k):
        j = order[u]
        acc = grad[j] - lam * np.sign(beta[j])
        row = G[j]
        for v in range(k):
            acc += row[order[v]] * beta[order[v]]
        b[u] = acc
    for u in range(k):
        acc = b[u]
        for v in range(u):
            acc -= L[u, v] * b[v]
        b[u] = acc / L[u, u]
    for u in range(k - 1, -1, -1):
        acc = b[u]
        for v in range(u + 1, k):
            acc -= L[v, u] * b[v]
        b[u] = acc / L[u, u]
    t = 1.0
    hit = -1
    for u in range(k):
        old = beta[order[u]]
        if b[u] * old < 0.0:
            frac = old / (old - b[u])
            if frac < t:
                t = frac
                hit = u
    m = beta.shape[0]
    for u in range(k):
        j = order[u]
        new = 0.0 if u == hit else beta[j] + t * (b[u] - beta[j])
        d = new - beta[j]
        if d != 0.0:
            beta[j] = new
            row = G[j]
            for r in range(m):
                grad[r] -= row[r] * d
    return 1 if hit >= 0 else 2


@numba.njit(cache=True, nogil=True)
def _solve_one(G, c, beta, grad, lam, tol, max_passes, trace, yy, exact_first,
               L, order, pos, state):
    """Solve at a single ``lam`` in place. Returns passes used, or -1 on failure.

    Each orthant step counts as a pass.
    """
    m = beta.shape[0]
    full = np.arange(m)
    active = np.empty(m, dtype=np.int64)
    passes = 0
    while passes < max_passes:
        biggest = _sweep(G, grad, beta, lam, full, m)
        if trace.shape[0] > passes:
            trace[passes] = _objective(c, yy, beta, grad, lam)
        passes += 1
        if biggest < tol:
            return passes
        n_act = 0
        for j in range(m):
            if beta[j] != 0.0:
                active[n_act] = j
                n_act += 1
        inner = 0
        while passes < max_passes:
            if inner >= exact_first:
                status = _orthant_step(G, c, beta, grad, lam, L, order, pos, state)
                if status > 0:
                    if trace.shape[0] > passes:
                        trace[passes] = _objective(c, yy, beta, grad, lam)
                    passes += 1
                    if status == 2:
                        break
                    # a coordinate left the active set: back to sweeps first
                    n_act = 0
                    for j in range(m):
                        if beta[j] != 0.0:
                            active[n_act] = j
                            n_act += 1
                    inner = 0
                    continue
            biggest = _sweep(G, grad, beta, lam, active, n_act)
            if trace.shape[0] > passes:
                trace[passes] = _objective(c, yy, beta, grad, lam)
            passes += 1
            inner += 1
            if biggest < tol:
                break
    return -1


@numba.njit(cache=True, nogil=True)
def _new_factor(m):
    return np.zeros((m, m)), np.zeros(m, dtype=np.int64), np.full(m, -1, dtype=np.int64), np.zeros(1, dtype=np.int64)


@numba.njit(cache=True, nogil=True)
def _solve_path(G, c, lambdas, tol, max_passes, yy, exact_first):
    m = c.shape[0]
    out = np.zeros((lambdas.shape[0], m))
    beta = np.zeros(m)
    grad = c.copy()
    no_trace = np.empty(0)
    L, order, pos, state = _new_factor(m)
    for i in range(lambdas.shape[0]):
        if _solve_one(G, c, beta, grad, lambdas[i], tol, max_passes, no_trace, yy, exact_first,
                      L, order, pos, state) < 0:
            return out, i
        out[i] = beta
    return out, -1


def _gram(M, y):
    n = M.shape[0]
    M = np.ascontiguousarray(M, dtype=float)
    return M.T @ M / n, M.T @ y / n, float(y @ y) / n


def lambda_max(M, y) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.max(np.abs(M.T @ np.asarray(y, dtype=float))) / M.shape[0])


def default_lambda_grid(M, y, n_lambda: int = 100, ratio: float | None = None) -> np.ndarray:
    """Log-spaced grid from ``lambda_max`` down to ``ratio * lambda_max``.

    The default ratio is 1e-3, or 1e-2 when ``M`` has more columns than rows
    (the dense, slow end of the path adds nothing there).
    """
    if ratio is None:
        ratio = 1e-2 if M.shape[0] < M.shape[1] else 1e-3
    top = lambda_max(M, y)
    if top == 0.0:
        return np.zeros(1)
    return top * np.logspace(0.0, np.log10(ratio), n_lambda)


def lasso_path(M, y, lambdas, tol: float = TOL, max_passes: int = MAX_PASSES) -> np.ndarray:
    """Coefficients at each ``lam`` (rows follow ``lambdas``, which must be non-increasing)."""
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(np.diff(lambdas) > 0) or np.any(lambdas < 0):
        raise InvalidParams("lambda path must be a non-empty, non-increasing, nonnegative sequence")
    G, c, yy = _gram(M, np.asarray(y, dtype=float))
    out, failed = _solve_path(G, c, lambdas, tol, max_passes, yy, EXACT_FIRST)
    if failed >= 0:
        raise ConvergenceFailure(f"lasso did not converge at lambda={lambdas[failed]:.3g}")
    return out


def lasso_trace(M, y, lam: float, max_passes: int = MAX_PASSES, tol: float = TOL):
    """Solve at one ``lam`` from zero, returning ``(beta, objective after each pass)``."""
    G, c, yy = _gram(M, np.asarray(y, dtype=float))
    beta = np.zeros(c.shape[0])
    trace = np.full(max_passes, np.nan)
    L, order, pos, state = _new_factor(c.shape[0])
    used = _solve_one(G, c, beta, c.copy(), float(lam), tol, max_passes, trace, yy, EXACT_FIRST,
                      L, order, pos, state)
    if used < 0:
        raise ConvergenceFailure("lasso did not converge")
    return beta, trace[:used]


def column_scale(M) -> np.ndarray:
    """Root-mean-square of each column (1 for all-zero columns)."""
    scale = np.sqrt(np.mean(np.asarray(M, dtype=float) ** 2, axis=0))
    return np.where(scale > 0, scale, 1.0)


def fold_ids(n: int, k: int, rng) -> np.ndarray:
    if k < 2 or k > n:
        raise InvalidParams(f"need 2 <= folds <= n, got {k}")
    ids = np.empty(n, dtype=int)
    ids[as_generator(rng).permutation(n)] = np.arange(n) % k
    return ids


def cv_lasso(M, y, lambdas=None, folds: int = 5, rng=None, standardize: bool = True):
    """Cross-validated lasso refit on all rows at the selected ``lam``.

    Returns ``(beta, lam_selected, lambdas, cv_error)`` with ``beta`` on the
    scale of the original columns.
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = column_scale(M) if standardize else np.ones(M.shape[1])
    Ms = M / scale
    lambdas = default_lambda_grid(Ms, y) if lambdas is None else np.sort(np.asarray(lambdas, float))[::-1]
    ids = fold_ids(M.shape[0], folds, rng)
    err = np.zeros(lambdas.size)
    for f in range(folds):
        train = ids != f
        sc = column_scale(M[train]) if standardize else np.ones(M.shape[1])
        path = lasso_path(M[train] / sc, y[train], lambdas) / sc
        resid = y[~train, None] - M[~train] @ path.T
        err += np.sum(resid**2, axis=0)
    err /= M.shape[0]
    best = int(np.argmin(err))
    beta = lasso_path(Ms, y, lambdas[:best + 1])[-1] / scale
    return beta, float(lambdas[best]), lambdas, err
