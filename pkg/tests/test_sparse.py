"""CSR kernels, matvec accounting and the tridiagonal exponential."""
import threading

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from hubmag.sparse import (MatvecCounter, SparseRealMatrix,
                           dense_expm_tridiagonal, resolve_counter, spmv)


def random_csr(n, density, seed):
    rng = np.random.default_rng(seed)
    m = sp.random(n, n, density=density, random_state=rng, format="csr")
    m.sort_indices()
    return SparseRealMatrix(n, m.indptr.astype(np.int64),
                            m.indices.astype(np.int64),
                            m.data.astype(np.float64)), m


def test_spmv_matches_scipy():
    a, ref = random_csr(40, 0.15, 1)
    rng = np.random.default_rng(2)
    x = rng.normal(size=40) + 1j * rng.normal(size=40)
    got = spmv(a, x)
    assert np.max(np.abs(got - ref @ x)) < 1e-13
    got2 = spmv(a, x, scale=2.0 - 1.5j)
    assert np.max(np.abs(got2 - (2.0 - 1.5j) * (ref @ x))) < 1e-13


def test_spmv_counts_and_dimension_check():
    a, _ = random_csr(10, 0.3, 3)
    c = MatvecCounter()
    spmv(a, np.ones(10, dtype=np.complex128), counter=c)
    assert c.count == 1
    with pytest.raises(ValueError):
        spmv(a, np.ones(11, dtype=np.complex128))


@given(st.integers(0, 2 ** 31), st.integers(0, 2 ** 31))
@settings(max_examples=30, deadline=None)
def test_spmv_linearity(seed_a, seed_x):
    a, _ = random_csr(15, 0.4, seed_a % 1000)
    rng = np.random.default_rng(seed_x % 1000)
    x = rng.normal(size=15) + 1j * rng.normal(size=15)
    y = rng.normal(size=15) + 1j * rng.normal(size=15)
    lhs = spmv(a, x + 2j * y)
    rhs = spmv(a, x) + 2j * spmv(a, y)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_validate_catches_malformed():
    a, _ = random_csr(8, 0.4, 5)
    a.validate()
    bad = SparseRealMatrix(8, a.row_ptr.copy(), a.col_idx.copy(),
                           a.values.copy())
    bad.row_ptr[-1] += 1
    with pytest.raises(ValueError):
        bad.validate()
    bad2 = SparseRealMatrix(8, np.array([0, 2, 1, 2, 2, 2, 2, 2, 2]),
                            np.array([0, 1]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        bad2.validate()


def test_counter_basics():
    c = MatvecCounter()
    assert c.count == 0
    c.add()
    c.add(4)
    assert c.count == 5
    d = MatvecCounter()
    d.add(7)
    c.merge(d)
    assert c.count == 12
    c.reset()
    assert c.count == 0
    assert resolve_counter(c) is c


def test_counter_thread_safety():
    c = MatvecCounter()

    def work():
        for _ in range(2000):
            c.add()

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert c.count == 16000


def test_model_apply_linear_counts(square_model):
    c = MatvecCounter()
    x = np.ones(square_model.n, dtype=np.complex128)
    square_model.apply_linear(1.0, 0.5, 0.25j, x, c)
    assert c.count == 3
    square_model.apply_linear(1.0, 0.5, 0.0, x, c)
    assert c.count == 5
    square_model.apply_linear(0.0, 0.5, 0.0, x, c)
    assert c.count == 6
    square_model.apply_linear(2.0, 0.0, 0.0, x, c)
    assert c.count == 7


def test_model_apply_linear_matches_dense(square_model):
    from conftest import model_dense_h

    rng = np.random.default_rng(11)
    x = rng.normal(size=square_model.n) + 1j * rng.normal(size=square_model.n)
    n = square_model.n
    s = np.zeros((n, n)); a = np.zeros((n, n))
    rp, ci = square_model.h_symm.row_ptr, square_model.h_symm.col_idx
    for i in range(n):
        for p in range(rp[i], rp[i + 1]):
            s[i, ci[p]] = square_model.h_symm.values[p]
            a[i, ci[p]] = square_model.h_anti.values[p]
    for wd, ws, wa in [(1.0, 0.3, 0.7j), (0.0, 1.0, 1.0), (2.0, 0.0, 1j),
                       (-1j, -1j * 0.99, 0.11)]:
        want = (wd * np.diag(square_model.h_diag) + ws * s + wa * a) @ x
        got = square_model.apply_linear(wd, ws, wa, x)
        assert np.max(np.abs(got - want)) < 1e-12


def test_tridiagonal_expm_matches_dense():
    rng = np.random.default_rng(9)
    for m in (1, 2, 5, 24, 60):
        alpha = rng.normal(size=m)
        beta = np.abs(rng.normal(size=m - 1)) + 0.1
        t = 0.8
        tri = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        want = expm(-1j * t * tri)
        got = dense_expm_tridiagonal(alpha, beta, t)
        assert np.max(np.abs(got - want)) < 1e-12


def test_tridiagonal_expm_unitary_and_validated():
    rng = np.random.default_rng(10)
    alpha = rng.normal(size=12)
    beta = np.abs(rng.normal(size=11)) + 0.05
    u = dense_expm_tridiagonal(alpha, beta, 2.5)
    assert np.max(np.abs(u @ u.conj().T - np.eye(12))) < 1e-12
    with pytest.raises(ValueError):
        dense_expm_tridiagonal(np.zeros(200), np.zeros(199), 1.0)
    with pytest.raises(ValueError):
        dense_expm_tridiagonal(np.zeros(5), np.zeros(3), 1.0)
