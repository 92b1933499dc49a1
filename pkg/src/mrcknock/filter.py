"""The knockoff threshold, selection and evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParams


@dataclass(frozen=True)
class SelectionResult:
    threshold: float
    selected: tuple
    q: float

    @property
    def n_selected(self) -> int:
        return len(self.selected)


def _as_fraction(q) -> Fraction:
    if not 0 < q < 1:
        raise InvalidParams(f"q must lie in (0, 1), got {q}")
    # exact value of the double, so comparisons below are exact
    return Fraction(float(q))


def _weights(W) -> np.ndarray:
    return np.asarray(W.w if hasattr(W, "w") else W, dtype=float).ravel()


def knockoff_threshold(W, q: float) -> SelectionResult:
    """Smallest ``t`` among the nonzero ``|W_j|`` with ``(#{W <= -t} + 1) / #{W >= t} <= q``.

    Returns ``T = inf`` and an empty selection when no candidate qualifies.
    """
    w = _weights(W)
    qf = _as_fraction(q)
    cands = np.unique(np.abs(w[w != 0]))
    neg = np.sort(-w[w < 0])  # magnitudes of negative entries
    pos = np.sort(w[w > 0])
    for t in cands:
        n_neg = neg.size - np.searchsorted(neg, t, side="left")
        n_pos = pos.size - np.searchsorted(pos, t, side="left")
        if n_pos and (n_neg + 1) * qf.denominator <= qf.numerator * n_pos:
            sel = tuple(int(j) for j in np.flatnonzero(w >= t))
            return SelectionResult(float(t), sel, float(q))
    return SelectionResult(math.inf, (), float(q))


def sorted_signs(W) -> np.ndarray:
    """Signs of the nonzero entries ordered by decreasing magnitude."""
    w = _weights(W)
    w = w[w != 0]
    order = np.argsort(-np.abs(w), kind="stable")
    return np.sign(w[order]).astype(int)


def psi_count(signs, q: float) -> int:
    """Largest ``k >= 1`` with ``k <= (1 + q) V_k - 1``, or 0 if there is none.

    ``V_k`` counts the +1 entries among the first ``k`` signs and stays at
    its final value for ``k`` beyond the length of ``signs``.
    """
    signs = np.asarray(signs, dtype=int).ravel()
    if np.any(np.abs(signs) != 1):
        raise InvalidParams("signs must be +1 or -1")
    qf = _as_fraction(q)
    one_q = 1 + qf
    v = np.cumsum(signs == 1)
    best = 0
    for k in range(1, signs.size + 1):
        if k <= one_q * int(v[k - 1]) - 1:
            best = k
    tail = math.floor(one_q * int(v[-1] if v.size else 0) - 1)
    return max(best, tail if tail > signs.size else 0)


def discoveries_from_psi(psi: int, q: float) -> int:
    return math.ceil(Fraction(psi + 1) / (1 + _as_fraction(q)))


def evaluate(selection: SelectionResult, beta_true) -> tuple[float, float]:
    """``(fdp, power)`` of a selection against the true coefficients."""
    beta = np.asarray(beta_true).ravel()
    sel = np.asarray(selection.selected, dtype=int)
    if sel.size and (sel.min() < 0 or sel.max() >= beta.size):
        raise InvalidParams("selected index outside the coefficient vector")
    nonnull = beta != 0
    hits = int(np.sum(nonnull[sel])) if sel.size else 0
    false = sel.size - hits
    return false / max(sel.size, 1), hits / max(int(nonnull.sum()), 1)
