"""Simulation harness: design generators, replication runner and CSV output."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import covariance as cv
from .covariance import CovModel
from .errors import InvalidKind, InvalidParams, KnockoffError
from .filter import evaluate, knockoff_threshold
from .rng import RngStream, as_generator
from .samplers import construct_fixed_x, sample_gaussian_mx, sample_second_order
from .smatrix import SolverOptions, solve_smatrix
from .stats import STATISTICS, compute_statistic

COV_KINDS = ("equi", "block_equi", "ar1", "ar1_corr", "er_cov", "er_prec")
RANDOM_COV_KINDS = ("ar1", "ar1_corr", "er_cov", "er_prec")
RESPONSE_KINDS = ("gaussian_linear", "binomial_probit_sigmoid", "cos", "cubic",
                  "pairint", "quadratic", "trunclinear")
COV_ESTIMATORS = ("oracle", "mle", "ledoit_wolf")
SAMPLERS = ("model_x", "fixed_x")
COEF_LAWS = ("uniform", "sign")
METHOD_ALIASES = {"mvr": "mvr", "maxent": "maxent", "me": "maxent", "sdp": "sdp", "equi": "equi"}
CSV_HEADER = ("method", "cov_kind", "rho", "n", "p", "q", "stat", "replication", "seed",
              "power", "fdp", "threshold", "runtime_ms")
EIG_FLOOR = 1e-3

# sub-stream indices inside one replication
_SIGMA, _BETA, _X, _Y, _KNOCK, _STAT = range(6)


# --------------------------------------------------------------------------
# generators


def _param(params, name, default):
    if params is None:
        return default
    if isinstance(params, dict):
        return params.get(name, default)
    return getattr(params, name, default)


def gen_covariance(kind: str, params, rng) -> CovModel:
    """Draw (or build) a unit-diagonal correlation matrix of family ``kind``.

    ``params`` is a mapping or an :class:`ExperimentConfig`; recognised keys
    are ``p``, ``rho``, ``block_size``, ``ar1_a``, ``ar1_b`` and ``er_sparsity``.
    """
    p = int(_param(params, "p", 0))
    if p < 1:
        raise InvalidParams("p must be a positive integer")
    if kind in ("equi", "block_equi"):
        rho = float(_param(params, "rho", 0.5))
        if not 0.0 <= rho < 1.0:
            raise InvalidParams(f"rho must lie in [0, 1), got {rho}")
        if kind == "equi":
            return CovModel(cv.equicorrelated(p, rho))
        ell = int(_param(params, "block_size", 5))
        if ell < 1 or p % ell:
            raise InvalidParams(f"block size {ell} does not divide p={p}")
        block = cv.equicorrelated(ell, rho)
        return CovModel(cv.block_diagonal(*([block] * (p // ell))))
    rng = as_generator(rng)
    if kind in ("ar1", "ar1_corr"):
        a = float(_param(params, "ar1_a", 3.0))
        b = float(_param(params, "ar1_b", 1.0))
        if a <= 0 or b <= 0:
            raise InvalidParams("Beta parameters must be positive")
        sigma = cv.ar1(rng.beta(a, b, size=p))
        return CovModel(cv.floor_eigenvalues(sigma, EIG_FLOOR))
    if kind in ("er_cov", "er_prec"):
        prob = float(_param(params, "er_sparsity", 0.2))
        if not 0.0 <= prob <= 1.0:
            raise InvalidParams("er_sparsity must lie in [0, 1]")
        mask = rng.random((p, p)) < prob
        signs = rng.choice([-1.0, 1.0], size=(p, p))
        mags = rng.uniform(0.1, 1.0, size=(p, p))
        V = np.tril(mask * signs * mags, -1)
        M = V + V.T
        M += (0.1 - np.linalg.eigvalsh(M)[0]) * np.eye(p)
        if kind == "er_prec":
            M = np.linalg.inv(M)
        return CovModel(cv.cov_to_corr(M))
    raise InvalidKind(f"unknown covariance kind {kind!r}; expected one of {COV_KINDS}")


def gen_coefficients(p: int, k: int, delta: float, clustered: bool = False, rng=None,
                     block_size: int | None = None, law: str = "uniform") -> np.ndarray:
    """Sparse coefficients with ``k`` non-nulls of magnitude in ``[delta/2, delta]``.

    ``clustered`` puts the support on one contiguous run. ``block_size`` fills
    whole blocks of that size instead (used with block-equicorrelated designs).
    ``law="sign"`` gives every non-null magnitude exactly ``delta``.
    """
    if not 0 <= k <= p:
        raise InvalidParams(f"need 0 <= k <= p, got k={k}, p={p}")
    if law not in COEF_LAWS:
        raise InvalidKind(f"unknown coefficient law {law!r}")
    rng = as_generator(rng)
    beta = np.zeros(p)
    if k == 0:
        return beta
    if clustered:
        start = int(rng.integers(0, p - k + 1))
        idx = np.arange(start, start + k)
    elif block_size:
        n_blocks = p // block_size
        chosen = np.sort(rng.choice(n_blocks, size=math.ceil(k / block_size), replace=False))
        idx = (chosen[:, None] * block_size + np.arange(block_size)).ravel()[:k]
    else:
        idx = np.sort(rng.choice(p, size=k, replace=False))
    signs = rng.choice([-1.0, 1.0], size=k)
    mags = np.full(k, float(delta)) if law == "sign" else rng.uniform(delta / 2, delta, size=k)
    beta[idx] = signs * mags
    return beta


def pair_layout(beta) -> np.ndarray:
    """Pairs of the non-null indices taken left to right, shape ``(k/2, 2)``."""
    idx = np.flatnonzero(np.asarray(beta))
    if idx.size % 2:
        raise InvalidParams("pairint needs an even number of non-null coefficients")
    return idx.reshape(-1, 2)


def _mean_function(X, beta, kind):
    if kind in ("gaussian_linear", "binomial_probit_sigmoid"):
        return X @ beta
    if kind == "cos":
        return np.cos(X) @ beta
    if kind == "cubic":
        return (X**3) @ beta - X @ beta
    if kind == "quadratic":
        return (X**2) @ beta
    if kind == "trunclinear":
        return ((X * beta) > 0) @ np.sign(beta)
    if kind == "pairint":
        pairs = pair_layout(beta)
        if pairs.size == 0:
            return np.zeros(X.shape[0])
        return (X[:, pairs[:, 0]] * X[:, pairs[:, 1]]) @ beta[pairs[:, 0]]
    raise InvalidKind(f"unknown response kind {kind!r}; expected one of {RESPONSE_KINDS}")


def gen_response(X, beta, kind: str, rng) -> np.ndarray:
    """Draw ``y`` given ``X``: unit Gaussian noise around the mean, or Bernoulli.

    For ``pairint`` the interaction coefficient of each pair is the ``beta``
    entry of its left member.
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or beta.shape != (X.shape[1],):
        raise InvalidParams("X must be n x p and beta of length p")
    rng = as_generator(rng)
    mu = _mean_function(X, beta, kind)
    if kind == "binomial_probit_sigmoid":
        return (rng.random(X.shape[0]) < 1.0 / (1.0 + np.exp(-mu))).astype(float)
    return mu + rng.normal(size=X.shape[0])


# --------------------------------------------------------------------------
# configuration


def _as_tuple(value, cast):
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return (cast(value),)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a design, a response model and the knockoff pipeline.

    ``method`` and ``q`` may be lists; every replication then runs each
    method on the same data and knockoff noise, thresholded at each level.
    """

    p: int
    n: int
    cov_kind: str = "equi"
    rho: float = 0.5
    block_size: int = 5
    ar1_a: float = 3.0
    ar1_b: float = 1.0
    er_sparsity: float = 0.2
    response_kind: str = "gaussian_linear"
    coef_size: float = 1.0
    coef_law: str = "uniform"
    k: int = 0
    clustered: bool = False
    method: tuple = ("mvr",)
    statistic: str = "lcd"
    q: tuple = (0.1,)
    replications: int = 1
    base_seed: int = 0
    cov_estimation: str = "oracle"
    sampler: str = "model_x"
    slack: float = 1e-5
    cv_folds: int = 5

    def __post_init__(self):
        set_ = lambda name, v: object.__setattr__(self, name, v)  # noqa: E731
        set_("method", _as_tuple(self.method, str))
        set_("q", _as_tuple(self.q, float))
        for name in ("p", "n", "k", "replications", "block_size", "base_seed", "cv_folds"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise InvalidParams(f"{name} must be an integer")
        if self.p < 1 or self.n < 1:
            raise InvalidParams("p and n must be positive")
        if not 0 <= self.k <= self.p:
            raise InvalidParams("need 0 <= k <= p")
        if self.replications < 1:
            raise InvalidParams("replications must be at least 1")
        if self.base_seed < 0:
            raise InvalidParams("base_seed must be non-negative")
        if not self.q or any(not 0.0 < q < 1.0 for q in self.q):
            raise InvalidParams("every q must lie in (0, 1)")
        if not self.method:
            raise InvalidParams("at least one method is required")
        for m in self.method:
            if m not in METHOD_ALIASES:
                raise InvalidKind(f"unknown method {m!r}")
        checks = [("cov_kind", COV_KINDS), ("response_kind", RESPONSE_KINDS),
                  ("statistic", STATISTICS), ("cov_estimation", COV_ESTIMATORS),
                  ("sampler", SAMPLERS), ("coef_law", COEF_LAWS)]
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise InvalidKind(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.sampler == "fixed_x" and self.cov_estimation != "oracle":
            raise InvalidParams("fixed_x knockoffs use the sample Gram matrix; leave cov_estimation as oracle")
        if self.sampler == "fixed_x" and self.n < 2 * self.p:
            raise InvalidParams("fixed_x knockoffs need n >= 2p")
        if self.response_kind == "pairint" and self.k % 2:
            raise InvalidParams("pairint needs an even k")
        if self.cov_kind == "block_equi" and self.p % self.block_size:
            raise InvalidParams("block_size must divide p")
        if not 0.0 <= self.slack < 1.0:
            raise InvalidParams("slack must lie in [0, 1)")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = list(self.method)
        d["q"] = list(self.q)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentRecord:
    config_hash: str
    method: str
    cov_kind: str
    rho: float
    n: int
    p: int
    q: float
    stat: str
    replication: int
    seed: int
    power: float | None
    fdp: float | None
    threshold: float | None
    runtime_ms: float = field(compare=False)
    error: str = field(default="", compare=False)

    @property
    def failed(self) -> bool:
        return self.power is None

    def row(self, timing: bool = True) -> list[str]:
        def num(v):
            return "" if v is None else repr(v)

        return [self.method, self.cov_kind, repr(self.rho), str(self.n), str(self.p),
                repr(self.q), self.stat, str(self.replication), str(self.seed),
                num(self.power), num(self.fdp), num(self.threshold),
                repr(float(self.runtime_ms)) if timing else "0.0"]


# --------------------------------------------------------------------------
# runner


class _SCache:
    """S-matrices for a fixed covariance, solved once per method."""

    def __init__(self, cov: CovModel, opts: SolverOptions):
        self.cov, self.opts, self.store = cov, opts, {}

    def get(self, method):
        if method not in self.store:
            self.store[method] = solve_smatrix(self.cov, method, self.opts)
        return self.store[method]


def _draw_design(cfg: ExperimentConfig, stream: RngStream, fixed_sigma: CovModel | None):
    sigma = fixed_sigma
    if sigma is None:
        sigma = gen_covariance(cfg.cov_kind, cfg, stream.child(_SIGMA))
    block = cfg.block_size if cfg.cov_kind == "block_equi" else None
    clustered = cfg.clustered or cfg.cov_kind == "ar1_corr"
    beta = gen_coefficients(cfg.p, cfg.k, cfg.coef_size, clustered,
                            stream.child(_BETA), block_size=block, law=cfg.coef_law)
    X = stream.child(_X).generator().standard_normal((cfg.n, cfg.p)) @ sigma.chol.T
    y = gen_response(X, beta, cfg.response_kind, stream.child(_Y))
    return sigma, beta, X, y - y.mean()


def _knockoffs(cfg, method, X, sigma, cache, stream):
    rng = stream.child(_KNOCK).generator()
    opts = SolverOptions(slack=cfg.slack)
    if cfg.sampler == "fixed_x":
        Xn = X - X.mean(axis=0)
        Xn = Xn / np.linalg.norm(Xn, axis=0)
        s = solve_smatrix(Xn.T @ Xn, method, opts)
        return construct_fixed_x(Xn, s, rng)
    if cfg.cov_estimation == "oracle":
        s = cache.get(method) if cache is not None else solve_smatrix(sigma, method, opts)
        return sample_gaussian_mx(X, sigma, s, rng)
    est = cv.estimate_covariance(X, cfg.cov_estimation)
    s = solve_smatrix(est, method, opts)
    return sample_second_order(X, est, s, rng)


def _replicate(cfg: ExperimentConfig, r: int, fixed_sigma, cache, chash) -> list[ExperimentRecord]:
    stream = RngStream(cfg.base_seed, r)
    seed = stream.derived_seed()
    methods = [METHOD_ALIASES[m] for m in cfg.method]
    out = []

    def record(method, q, power, fdp, thr, ms, err=""):
        return ExperimentRecord(chash, method, cfg.cov_kind, cfg.rho, cfg.n, cfg.p, q,
                                cfg.statistic, r, seed, power, fdp, thr, ms, err)

    try:
        sigma, beta, X, y = _draw_design(cfg, stream, fixed_sigma)
    except (KnockoffError, np.linalg.LinAlgError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [record(m, q, None, None, None, 0.0, msg) for m in methods for q in cfg.q]
    for method in methods:
        t0 = time.perf_counter()
        try:
            ds = _knockoffs(cfg, method, X, sigma, cache, stream)
            W = compute_statistic(cfg.statistic, ds, y, rng=stream.child(_STAT).generator(),
                                  cv_folds=cfg.cv_folds)
            picks = [knockoff_threshold(W.w, q) for q in cfg.q]
        except (KnockoffError, np.linalg.LinAlgError) as exc:
            ms = (time.perf_counter() - t0) * 1e3
            msg = f"{type(exc).__name__}: {exc}"
            out.extend(record(method, q, None, None, None, ms, msg) for q in cfg.q)
            continue
        ms = (time.perf_counter() - t0) * 1e3
        for q, sel in zip(cfg.q, picks):
            fdp, power = evaluate(sel, beta)
            out.append(record(method, q, power, fdp, float(sel.threshold), ms))
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1, progress=None) -> list[ExperimentRecord]:
    """Run every replication of ``cfg`` and return records in replication order.

    Replication ``r`` draws all of its randomness from ``RngStream(base_seed, r)``,
    so the output does not depend on ``threads``. Failures inside a
    replication are recorded (``power is None``) rather than raised.
    """
    if threads < 1:
        raise InvalidParams("threads must be at least 1")
    chash = cfg.config_hash()
    fixed = None
    cache = None
    if cfg.cov_kind not in RANDOM_COV_KINDS:
        fixed = gen_covariance(cfg.cov_kind, cfg, None)
        _ = fixed.chol  # factor once, before any worker shares it
        if cfg.sampler == "model_x" and cfg.cov_estimation == "oracle":
            cache = _SCache(fixed, SolverOptions(slack=cfg.slack))
            for m in cfg.method:
                try:
                    cache.get(METHOD_ALIASES[m])
                except KnockoffError:
                    pass  # surfaces again, per replication, as a flagged failure

    def job(r):
        recs = _replicate(cfg, r, fixed, cache, chash)
        if progress is not None:
            progress(r)
        return recs

    reps = range(cfg.replications)
    if threads == 1:
        chunks = [job(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(job, reps))
    return [rec for chunk in chunks for rec in chunk]


# --------------------------------------------------------------------------
# persistence


def emit_csv(records: Sequence[ExperimentRecord], path, timing: bool = True) -> None:
    """Write records with the fixed header. ``timing=False`` writes ``runtime_ms`` as 0."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow(rec.row(timing))


def read_csv(path, config_hash: str = "") -> list[ExperimentRecord]:
    """Parse a file written by :func:`emit_csv`. Empty numeric cells become ``None``."""
    def opt(v):
        return None if v == "" else float(v)

    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise InvalidParams("unexpected CSV header")
        for row in reader:
            d = dict(zip(header, row))
            out.append(ExperimentRecord(
                config_hash, d["method"], d["cov_kind"], float(d["rho"]), int(d["n"]),
                int(d["p"]), float(d["q"]), d["stat"], int(d["replication"]), int(d["seed"]),
                opt(d["power"]), opt(d["fdp"]), opt(d["threshold"]), float(d["runtime_ms"])))
    return out


def summarize(records: Sequence[ExperimentRecord]) -> dict:
    """Mean power and FDP with standard errors, keyed by ``(method, q)``."""
    groups: dict = {}
    for rec in records:
        if not rec.failed:
            groups.setdefault((rec.method, rec.q), []).append((rec.power, rec.fdp))
    out = {}
    for key, vals in groups.items():
        arr = np.asarray(vals)
        se = arr.std(axis=0, ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else np.zeros(2)
        out[key] = {"power": float(arr[:, 0].mean()), "power_se": float(se[0]),
                    "fdr": float(arr[:, 1].mean()), "fdr_se": float(se[1]), "n": len(arr)}
    return out
