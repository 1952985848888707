import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from psamin.operators import SparsePlusLowRank
from psamin.triplets import (smallest_triplet_dense, smallest_triplet_sparse)
from psamin.families import ContractViolation


def check_triplet(M, t, tol=1e-10):
    Md = M.todense() if hasattr(M, "todense") and not isinstance(M, np.ndarray) else M
    Md = np.asarray(Md.toarray() if sp.issparse(Md) else Md)
    scale = 1 + np.linalg.norm(Md, 2)
    assert abs(np.linalg.norm(t.u) - 1) <= 1e-12
    assert abs(np.linalg.norm(t.v) - 1) <= 1e-12
    assert np.linalg.norm(Md @ t.v - t.sigma * t.u) <= tol * scale
    assert np.linalg.norm(Md.conj().T @ t.u - t.sigma * t.v) <= tol * scale
    svals = np.linalg.svd(Md, compute_uv=False)
    assert abs(t.sigma - svals[-1]) <= tol * scale


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dense_triplet_random(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 12)
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    t = smallest_triplet_dense(M)
    check_triplet(M, t, tol=1e-12)


def test_dense_triplet_rectangular(rng):
    M = rng.standard_normal((9, 4))
    t = smallest_triplet_dense(M)
    check_triplet(M, t, tol=1e-12)


def test_dense_triplet_phase_deterministic(rng):
    M = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    t1 = smallest_triplet_dense(M)
    # a global phase on the input columns of the SVD must not leak out
    t2 = smallest_triplet_dense(M.copy())
    assert np.allclose(t1.v, t2.v)
    assert np.allclose(t1.u, t2.u)
    pivot = t1.v[int(np.argmax(np.abs(t1.v)))]
    assert abs(pivot.imag) <= 1e-12
    assert pivot.real >= 0


def test_dense_triplet_rejects_wide():
    with pytest.raises(ContractViolation):
        smallest_triplet_dense(np.ones((2, 5)))


def test_dense_triplet_rejects_nonfinite():
    with pytest.raises(ContractViolation):
        smallest_triplet_dense(np.array([[np.nan]]))


def test_sparse_triplet_matches_dense():
    rng = np.random.default_rng(5)
    n = 900
    A = sp.random(n, n, density=0.01, random_state=5,
                  data_rvs=rng.standard_normal).tocsr()
    A = A + 2.0 * sp.identity(n)
    t = smallest_triplet_sparse(A, tol=1e-12)
    dense_sigma = np.linalg.svd(A.toarray(), compute_uv=False)[-1]
    assert abs(t.sigma - dense_sigma) <= 1e-8 * (1 + dense_sigma)
    check_triplet(A, t, tol=1e-7)


def test_sparse_triplet_low_rank_update():
    rng = np.random.default_rng(8)
    n = 900
    base = (sp.identity(n) * 3.0 + sp.random(n, n, density=0.005,
            random_state=8, data_rvs=rng.standard_normal)).tocsr()
    U = rng.standard_normal((n, 1))
    W = rng.standard_normal((n, 1))
    M = SparsePlusLowRank(base, U, W)
    t = smallest_triplet_sparse(M, tol=1e-12)
    dense_sigma = np.linalg.svd(M.todense(), compute_uv=False)[-1]
    assert abs(t.sigma - dense_sigma) <= 1e-8 * (1 + dense_sigma)


def test_sparse_triplet_rejects_bad_tol():
    with pytest.raises(ContractViolation):
        smallest_triplet_sparse(sp.identity(10).tocsr(), tol=0.0)


def test_smw_solver_consistency(rng):
    n = 50
    base = np.eye(n) * 2.0 + 0.1 * rng.standard_normal((n, n))
    U = rng.standard_normal((n, 2))
    W = rng.standard_normal((n, 2))
    M = SparsePlusLowRank(base, U, W)
    solve = M.solver()
    b = rng.standard_normal(n)
    x = solve(b)
    assert np.linalg.norm(M.matmat(x) - b) <= 1e-9 * np.linalg.norm(b)
