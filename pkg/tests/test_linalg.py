import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcknock import linalg
from mrcknock.covariance import equicorrelated
from mrcknock.errors import DowndateBreaksPD, NotPositiveDefinite


def random_spd(rng, p):
    A = rng.normal(size=(p, p))
    return A @ A.T + 0.5 * np.eye(p)


seeds = st.integers(0, 2**32 - 1)


def test_cholesky_identity():
    np.testing.assert_array_equal(linalg.cholesky(np.eye(3)), np.eye(3))


def test_cholesky_small_example():
    np.testing.assert_allclose(linalg.cholesky([[4, 2], [2, 5]]), [[2, 0], [1, 2]], atol=1e-14)


def test_cholesky_indefinite():
    with pytest.raises(NotPositiveDefinite):
        linalg.cholesky([[1, 2], [2, 1]])


def test_cholesky_pivot_tolerance():
    with pytest.raises(NotPositiveDefinite):
        linalg.cholesky(np.diag([1.0, 1e-13]))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, p=st.integers(1, 50))
def test_cholesky_roundtrip(seed, p):
    A = random_spd(np.random.default_rng(seed), p)
    L = linalg.cholesky(A)
    assert np.all(np.diag(L) > 0)
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ L.T - A) <= 1e-8 * np.linalg.norm(A)


def test_rank1_zero_vector_is_noop():
    L = linalg.cholesky(np.eye(2))
    np.testing.assert_array_equal(linalg.chol_rank1(L, np.zeros(2), "update"), L)


def test_rank1_update_example():
    L = linalg.chol_rank1(np.eye(2), [1.0, 0.0], "update")
    np.testing.assert_allclose(L, linalg.cholesky(np.diag([2.0, 1.0])), atol=1e-12)


def test_rank1_downdate_breaks_pd():
    with pytest.raises(DowndateBreaksPD):
        linalg.chol_rank1(np.eye(2), [2.0, 0.0], "downdate")


def test_rank1_leaves_input_untouched():
    L = linalg.cholesky([[4.0, 2.0], [2.0, 5.0]])
    before = L.copy()
    linalg.chol_rank1(L, [0.3, 0.4], "downdate")
    np.testing.assert_array_equal(L, before)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, p=st.integers(1, 30), k=st.integers(1, 20))
def test_rank1_sequence_matches_refactorisation(seed, p, k):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, p)
    L = linalg.cholesky(A)
    for _ in range(k):
        v = rng.normal(size=p)
        if rng.random() < 0.5:
            A = A + np.outer(v, v)
            L = linalg.chol_rank1(L, v, "update")
        else:
            # shrink the downdate so the result stays comfortably PD
            v = v * np.sqrt(0.5 * np.linalg.eigvalsh(A)[0] / (v @ v))
            A = A - np.outer(v, v)
            L = linalg.chol_rank1(L, v, "downdate")
    ref = linalg.cholesky(A)
    assert np.max(np.abs(L - ref)) <= 1e-6 * max(1.0, np.max(np.abs(ref)))


def test_diag_step_matches_refactorisation():
    rng = np.random.default_rng(3)
    A = random_spd(rng, 6)
    L = np.array(linalg.cholesky(A))
    linalg.diag_step_inplace(L, 2, 0.1)
    A[2, 2] -= 0.1
    np.testing.assert_allclose(L, linalg.cholesky(A), atol=1e-12)
    linalg.diag_step_inplace(L, 4, -0.7)
    A[4, 4] += 0.7
    np.testing.assert_allclose(L, linalg.cholesky(A), atol=1e-12)


def test_tri_solve_identity():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(linalg.tri_solve(np.eye(3), b), b)
    np.testing.assert_array_equal(linalg.tri_solve(np.eye(3), b, "upper"), b)


def test_tri_solve_example():
    L = linalg.cholesky([[4, 2], [2, 5]])
    np.testing.assert_allclose(linalg.tri_solve(L, [2.0, 3.0], "lower"), [1.0, 1.0], atol=1e-14)


def test_tri_solve_roundtrip_vs_dense_inverse():
    rng = np.random.default_rng(11)
    A = random_spd(rng, 5)
    b = rng.normal(size=5)
    L = linalg.cholesky(A)
    x = linalg.tri_solve(L, linalg.tri_solve(L, b, "lower"), "upper")
    np.testing.assert_allclose(x, np.linalg.inv(A) @ b, rtol=1e-10, atol=1e-12)
    y = linalg.tri_solve(L, b, "lower")
    assert np.linalg.norm(L @ y - b) <= 1e-10 * np.linalg.norm(b)
    z = linalg.tri_solve(L, b, "upper")
    assert np.linalg.norm(L.T @ z - b) <= 1e-10 * np.linalg.norm(b)


def test_min_eigenvalue_examples():
    assert linalg.min_eigenvalue(np.eye(4)) == pytest.approx(1.0, abs=1e-8)
    assert linalg.min_eigenvalue(equicorrelated(5, 0.5)) == pytest.approx(0.5, abs=1e-8)
    dense = np.linalg.eigvalsh(equicorrelated(10, 0.9))[0]
    assert dense == pytest.approx(0.1, abs=1e-12)
    assert linalg.min_eigenvalue(equicorrelated(10, 0.9)) == pytest.approx(0.1, abs=1e-8)


def test_min_eigenvalue_indefinite():
    assert linalg.min_eigenvalue([[1, 2], [2, 1]]) == pytest.approx(-1.0, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, p=st.integers(1, 50))
def test_min_eigenvalue_matches_dense(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(p, p))
    A = A + A.T
    assert abs(linalg.min_eigenvalue(A) - np.linalg.eigvalsh(A)[0]) <= 1e-8


def test_symmetrize_averages():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    S = linalg.symmetrize(A)
    assert S[0, 1] == S[1, 0] == 1.0
