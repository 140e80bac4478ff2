import numpy as np
import pytest
from hypothesis import given, strategies as st

from moment2d import Inconsistent, affine_sample, parametric_gauss, stacked_solve
from moment2d.linsolve import null_projector


def test_identity():
    a = parametric_gauss(np.eye(2), [1, 2])
    assert a.pivot_cols == (0, 1) and not a.null_basis and not a.consistency_residuals
    assert np.allclose(a.particular, [1, 2])


def test_zero_row_inconsistent():
    a = parametric_gauss([[0, 0, 0]], [5])
    assert a.consistency_residuals == (5,)
    assert len(a.null_basis) == 3
    assert not a.is_consistent()
    with pytest.raises(Inconsistent):
        affine_sample(a)


def test_small_example():
    A = np.array([[1, 1, 0], [0, 0, 1]])
    a = parametric_gauss(A, [3, 5])
    assert a.pivot_cols == (0, 2)          # 0-based columns 1 and 3
    assert np.allclose(a.particular, [3, 0, 5])
    assert len(a.null_basis) == 1 and np.allclose(a.null_basis[0], [-1, 1, 0])
    assert np.allclose(A @ a.particular, [3, 5]) and np.allclose(A @ a.null_basis[0], 0)
    assert np.allclose(affine_sample(a), a.particular)
    x = affine_sample(a, {1: 1})
    assert np.allclose(x, [2, 1, 5]) and a.residual(x) < 1e-12
    with pytest.raises(KeyError):
        affine_sample(a, {0: 1})


def test_stacked():
    A = np.array([[1, 1, 0], [0, 0, 1]], dtype=float)
    one = parametric_gauss(A, [3, 5])
    two = stacked_solve([(A, [3, 5]), (A, [3, 5])])
    assert np.allclose(null_projector(one), null_projector(two))
    three = stacked_solve([(A, [3, 5]), ([[0, 1, 0]], [1])])
    assert len(three.null_basis) == len(one.null_basis) - 1
    c = stacked_solve([([[1.0]], [0.0]), ([[1.0]], [1.0])])
    assert c.max_inconsistency() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        stacked_solve([(A, [3, 5]), (np.eye(2), [1, 1])])


def _random_system(rng, m, n, rank):
    A = (rng.normal(size=(m, rank)) + 1j * rng.normal(size=(m, rank))) @ \
        (rng.normal(size=(rank, n)) + 1j * rng.normal(size=(rank, n)))
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    return A, A @ x


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2 ** 31 - 1))
def test_random_consistent_systems(m, n, seed):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, min(m, n) + 1))
    A, f = _random_system(rng, m, n, rank)
    a = parametric_gauss(A, f)
    assert a.rank == rank
    tol = 1e-9 * (1 + np.abs(A).max() + np.abs(f).max())
    assert a.is_consistent()
    for _ in range(3):
        assign = {c: complex(*rng.normal(size=2)) for c in a.free_cols}
        assert a.residual(affine_sample(a, assign)) <= tol
    for v in a.null_basis:
        assert np.abs(A @ v).max() <= tol


@given(st.integers(2, 8), st.integers(2, 8), st.integers(0, 2 ** 31 - 1))
def test_column_permutation_equivariance(m, n, seed):
    rng = np.random.default_rng(seed)
    A, f = _random_system(rng, m, n, min(m, n) - 1 or 1)
    perm = rng.permutation(n)
    a = parametric_gauss(A, f)
    b = parametric_gauss(A[:, perm], f)
    assert len(a.null_basis) == len(b.null_basis)
    # a sample of the permuted system, un-permuted, solves the original
    x = affine_sample(b, {c: 1.0 for c in b.free_cols})
    y = np.empty_like(x)
    y[perm] = x
    assert a.residual(y) <= 1e-9 * (1 + np.abs(A).max() + np.abs(f).max())
    assert np.allclose(null_projector(a), null_projector(b)[np.ix_(np.argsort(perm), np.argsort(perm))], atol=1e-8)
