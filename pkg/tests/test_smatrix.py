import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcknock import linalg
from mrcknock import smatrix as sm
from mrcknock.covariance import CovModel, ar1, block_diagonal, equicorrelated, estimate_covariance
from mrcknock.errors import DegenerateCovariance, DegenerateData, NoRootInInterval

from oracles import dense_maxent_loss, dense_mvr_loss, random_correlation, sdp_oracle

TIGHT = sm.SolverOptions(n_iter=2000, converge_tol=1e-11)


# ---------------------------------------------------------------- equicorrelated


def test_equi_identity():
    r = sm.solve_equicorrelated(np.eye(6))
    np.testing.assert_allclose(r.s, 1 - 1e-5)


def test_equi_rho_075():
    r = sm.solve_equicorrelated(equicorrelated(10, 0.75))
    np.testing.assert_allclose(r.s, 0.5, atol=1e-4)


def test_equi_rho_025_is_clipped():
    sigma = equicorrelated(10, 0.25)
    r = sm.solve_equicorrelated(sigma, sm.SolverOptions(slack=0))
    np.testing.assert_allclose(r.s, 1.0, atol=1e-9)
    # oracle: MAC over feasible constant s on a fine grid is minimised at the cap
    grid = np.linspace(0, 1.5, 1501)
    feasible = [g for g in grid if np.linalg.eigvalsh(2 * sigma - g * np.eye(10))[0] >= 0]
    mac = [abs(1 - g) for g in feasible]
    assert feasible[int(np.argmin(mac))] == pytest.approx(1.0)


def test_equi_degenerate():
    with pytest.raises(DegenerateCovariance):
        sm.solve_equicorrelated(np.ones((3, 3)))


# ---------------------------------------------------------------- SDP


def test_sdp_equicorrelated_closed_form():
    r = sm.solve_sdp(equicorrelated(50, 0.6))
    np.testing.assert_allclose(r.s, 0.8, atol=1e-3)


def test_sdp_identity():
    np.testing.assert_allclose(sm.solve_sdp(np.eye(5)).s, 1.0, atol=1e-4)


@pytest.mark.parametrize("rho", [0.3, 0.5, 0.8])
def test_sdp_matches_generic_solver_ar1(rho):
    sigma = ar1(np.full(10, rho))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref = sdp_oracle(sigma)
    r = sm.solve_sdp(sigma)
    assert np.max(np.abs(r.s - ref)) <= 1e-3


def test_sdp_mac_non_increasing_per_level():
    rng = np.random.default_rng(5)
    sigma = random_correlation(12, rng)
    macs = []
    sm.solve_sdp(sigma, callback=lambda level, s: macs.append(np.mean(np.abs(1 - s))))
    assert len(macs) > 3
    assert np.all(np.diff(macs) <= 1e-12)


@pytest.mark.parametrize("rho", [0.5, 0.6, 0.75, 0.9])
def test_sdp_rank_degeneracy(rho):
    p = 30
    sigma = equicorrelated(p, rho)
    r = sm.solve_sdp(sigma, sm.SolverOptions(slack=0.0))
    assert sm.count_small_eigenvalues(sigma, r, 1e-6) == p - 1


# ---------------------------------------------------------------- MVR


def test_mvr_root_trivial():
    assert sm.mvr_coordinate_root(-1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)


def _random_triple(rng):
    c_d = np.exp(rng.uniform(-3, 3))
    c_n = -(c_d**2) * (1 + np.exp(rng.uniform(-6, 3)))
    s = np.exp(rng.uniform(-4, 2))
    return c_n, c_d, s


def test_mvr_root_stationary_by_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(50):
        c_n, c_d, s = _random_triple(rng)
        d = sm.mvr_coordinate_root(c_n, c_d, s)

        def f(x):
            return 1 / (s + x) - x * c_n / (1 - x * c_d)

        h = 1e-6 * min(s + d, 1 / c_d - d)
        deriv = (f(d + h) - f(d - h)) / (2 * h)
        # scale: second derivative magnitude times h is the FD noise floor
        curv = 2 / (s + d) ** 3 + 2 * (-c_n) * c_d / (1 - d * c_d) ** 3
        assert abs(deriv) <= 1e-8 * max(1.0, curv * (s + d + 1 / c_d))


def test_mvr_root_inside_interval_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        c_n, c_d, s = _random_triple(rng)
        d = sm.mvr_coordinate_root(c_n, c_d, s)
        assert -s < d < 1 / c_d


def test_mvr_root_rejects_bad_inputs():
    with pytest.raises(NoRootInInterval):
        sm.mvr_coordinate_root(1.0, 1.0, 1.0)


def test_mvr_identity():
    np.testing.assert_allclose(sm.solve_mvr(np.eye(7)).s, 1.0, atol=1e-8)


def test_mvr_two_dim_grid_oracle():
    r = sm.solve_mvr(equicorrelated(2, 0.6), TIGHT)
    grid = np.linspace(0, 0.8, 10**6 + 2)[1:-1]
    loss = 2 / grid + 1 / (0.8 - grid) + 1 / (3.2 - grid)
    best = grid[np.argmin(loss)]
    np.testing.assert_allclose(r.s, best, atol=1e-4)


def test_mvr_equicorrelated_large():
    r = sm.solve_mvr(equicorrelated(500, 0.5))
    assert np.max(np.abs(r.s - 0.5)) <= 0.01


def test_mvr_monotone_descent():
    rng = np.random.default_rng(2)
    sigma = random_correlation(8, rng, 0.02)
    losses = []
    sm.solve_mvr(sigma, callback=lambda j, s: losses.append(dense_mvr_loss(sigma, s)))
    assert np.all(np.diff(losses) <= 1e-10)


# ---------------------------------------------------------------- maxent


def test_maxent_identity():
    np.testing.assert_allclose(sm.solve_maxent(np.eye(7)).s, 1.0, atol=1e-8)


def test_maxent_equicorrelated_large():
    r = sm.solve_maxent(equicorrelated(500, 0.7))
    assert np.max(np.abs(r.s - 0.3)) <= 0.01


@pytest.mark.parametrize("rho", [0.2, 0.5, 0.8])
def test_mvr_maxent_close_for_large_equicorrelated(rho):
    sigma = equicorrelated(500, rho)
    assert np.max(np.abs(sm.solve_mvr(sigma).s - sm.solve_maxent(sigma).s)) <= 0.02


def test_maxent_monotone_descent():
    rng = np.random.default_rng(3)
    sigma = random_correlation(8, rng, 0.02)
    losses = []
    sm.solve_maxent(sigma, callback=lambda j, s: losses.append(dense_maxent_loss(sigma, s)))
    assert np.all(np.diff(losses) <= 1e-10)


def test_maxent_update_uses_exact_schur_quantity():
    rng = np.random.default_rng(4)
    sigma = random_correlation(6, rng)
    s = np.full(6, 0.5 * np.linalg.eigvalsh(sigma)[0])
    D = 2 * sigma - np.diag(s)
    Dinv = np.linalg.inv(D)
    for j in range(6):
        assert sm.schur_bound(sigma, s, j) == pytest.approx(s[j] + 1 / Dinv[j, j], rel=1e-10)


# ---------------------------------------------------------------- scaling, blocks, search


def test_scale_endpoints():
    r = sm.solve_mvr(equicorrelated(5, 0.3))
    np.testing.assert_array_equal(sm.scale_smatrix(r, 1.0).s, r.s)
    np.testing.assert_array_equal(sm.scale_smatrix(r, 0.0).s, np.zeros(5))


def test_scale_keeps_margin():
    sigma = equicorrelated(20, 0.6)
    r = sm.scale_smatrix(sm.solve_sdp(sigma), 0.99)
    lam = linalg.min_eigenvalue(sm.gram_matrix(sigma, r))
    assert lam >= 0.01 * np.min(r.s)


def test_blockdiag_identical_blocks():
    blk = equicorrelated(4, 0.5)
    r = sm.solve_blockdiag([blk, blk], "mvr")
    np.testing.assert_array_equal(r.s[:4], r.s[4:])


@pytest.mark.parametrize("method", ["mvr", "maxent", "sdp"])
def test_blockdiag_matches_direct(method):
    blocks = [equicorrelated(5, 0.5), ar1(np.full(5, 0.7))]
    via_blocks = sm.solve_blockdiag(blocks, method, TIGHT)
    direct = sm.solve_smatrix(block_diagonal(*blocks), method, TIGHT)
    assert np.max(np.abs(via_blocks.s - direct.s)) <= 1e-6


def test_blockdiag_single_block():
    sigma = ar1(np.full(6, 0.5))
    np.testing.assert_allclose(sm.solve_blockdiag([sigma], "mvr").s, sm.solve_mvr(sigma).s)


def test_linesearch_whole_partition():
    sigma = ar1(np.full(8, 0.6))
    r = sm.approx_then_linesearch(sigma, [np.arange(8)], "mvr")
    np.testing.assert_allclose(r.s, sm.solve_mvr(sigma).s)


@pytest.mark.parametrize("method", ["mvr", "maxent"])
def test_linesearch_singletons_worse_than_exact(method):
    sigma = equicorrelated(10, 0.5)
    r = sm.approx_then_linesearch(sigma, [[j] for j in range(10)], method)
    assert np.all(r.s <= 1.0 + 1e-12)
    exact = sm.solve_smatrix(sigma, method)
    key = "mvr" if method == "mvr" else "maxent"
    assert getattr(sm.loss_report(sigma, r), key) >= getattr(sm.loss_report(sigma, exact), key) - 1e-9


def test_linesearch_is_grid_argmin():
    rng = np.random.default_rng(6)
    sigma = random_correlation(9, rng, 0.02)
    r = sm.approx_then_linesearch(sigma, 3, "mvr")
    approx = np.concatenate([sm.solve_mvr(sigma[i:i + 3, i:i + 3]).s for i in (0, 3, 6)])
    best = sm.loss_report(sigma, r).mvr
    for g in np.arange(1, 101) / 100:
        if sm.is_feasible(sigma, g * approx, tol=-1e-12):
            assert best <= dense_mvr_loss(sigma, g * approx) + 1e-9


def test_scaled_losses_match_dense():
    rng = np.random.default_rng(7)
    sigma = random_correlation(6, rng)
    s = sm.solve_mvr(sigma).s
    vals = sm.scaled_losses(sigma, s, [0.3, 0.9], "mvr")
    np.testing.assert_allclose(vals, [dense_mvr_loss(sigma, g * s) for g in (0.3, 0.9)], rtol=1e-9)
    vals = sm.scaled_losses(sigma, s, [0.3, 0.9], "maxent")
    np.testing.assert_allclose(vals, [dense_maxent_loss(sigma, g * s) for g in (0.3, 0.9)], rtol=1e-9)


# ---------------------------------------------------------------- losses


def test_loss_identity():
    r = sm.loss_report(np.eye(4), np.ones(4))
    assert r.mvr == pytest.approx(8.0)
    assert r.maxent == pytest.approx(0.0, abs=1e-12)
    assert r.mac == 0.0


@pytest.mark.parametrize("p,rho", [(10, 0.5), (50, 0.3), (200, 0.8)])
def test_loss_equicorrelated_closed_form(p, rho):
    r = sm.loss_report(equicorrelated(p, rho), np.full(p, 1 - rho))
    expected = (2 * p - 1) / (1 - rho) + 1 / (2 * p * rho + 1 - rho)
    assert r.mvr == pytest.approx(expected, rel=1e-10)


def test_loss_random_vs_dense():
    rng = np.random.default_rng(8)
    for p in (3, 10, 20):
        sigma = random_correlation(p, rng, 0.01)
        s = sm.solve_maxent(sigma).s * rng.uniform(0.3, 1.0, size=p)
        r = sm.loss_report(sigma, s)
        assert r.mvr == pytest.approx(dense_mvr_loss(sigma, s), rel=1e-8)
        assert r.maxent == pytest.approx(dense_maxent_loss(sigma, s), rel=1e-8, abs=1e-8)


# ---------------------------------------------------------------- invariants


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 15),
       method=st.sampled_from(["mvr", "maxent", "sdp", "equi"]))
def test_feasibility_invariant(seed, p, method):
    sigma = random_correlation(p, np.random.default_rng(seed), 0.01)
    r = sm.solve_smatrix(sigma, method)
    assert np.all(r.s >= 0)
    assert linalg.min_eigenvalue(2 * sigma - np.diag(r.s)) >= -1e-8


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), method=st.sampled_from(["mvr", "maxent", "equi"]))
def test_permutation_equivariance(seed, method):
    rng = np.random.default_rng(seed)
    sigma = random_correlation(7, rng, 0.02)
    perm = rng.permutation(7)
    a = sm.solve_smatrix(sigma, method, TIGHT).s
    b = sm.solve_smatrix(sigma[np.ix_(perm, perm)], method, TIGHT).s
    np.testing.assert_allclose(b, a[perm], atol=1e-7)


def test_degenerate_sigma_rejected():
    with pytest.raises(DegenerateCovariance):
        sm.solve_mvr(np.ones((4, 4)))


def test_solver_options_validation():
    with pytest.raises(ValueError):
        sm.SolverOptions(n_iter=0)
    with pytest.raises(ValueError):
        sm.SolverOptions(slack=1.0)


# ---------------------------------------------------------------- covariance estimation


def test_estimate_near_identity():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(10000, 5))
    for method in ("mle", "ledoit_wolf"):
        est = estimate_covariance(X, method)
        assert np.max(np.abs(est.matrix - np.eye(5))) <= 0.05


def test_estimate_repeated_row():
    with pytest.raises(DegenerateData):
        estimate_covariance(np.tile([1.0, 2.0, 3.0], (5, 1)))


def test_ledoit_wolf_pd_when_n_below_p():
    X = np.random.default_rng(10).normal(size=(50, 100))
    est = estimate_covariance(X, "ledoit_wolf")
    assert linalg.min_eigenvalue(est.matrix) > 0
    np.testing.assert_allclose(np.diag(est.matrix), 1.0)


def test_ledoit_wolf_matches_sklearn():
    from sklearn.covariance import ledoit_wolf

    from mrcknock.covariance import ledoit_wolf_shrinkage

    X = np.random.default_rng(11).normal(size=(40, 15)) @ np.random.default_rng(12).normal(size=(15, 15))
    ours, shrink = ledoit_wolf_shrinkage(X)
    ref, ref_shrink = ledoit_wolf(X)
    assert shrink == pytest.approx(ref_shrink, rel=1e-10)
    np.testing.assert_allclose(ours, ref, rtol=1e-10, atol=1e-12)


def test_covmodel_symmetrises():
    c = CovModel(np.array([[1.0, 0.2], [0.4, 1.0]]))
    assert c.matrix[0, 1] == c.matrix[1, 0] == pytest.approx(0.3)
