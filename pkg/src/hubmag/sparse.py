"""Sparse CSR kernels and matvec accounting.

The two hopping matrices share one sparsity pattern, so the hot path is a
fused kernel that walks the pattern once and accumulates both value arrays
with complex weights. All kernels are nopython-compiled and release the GIL
so that independent experiment cells can run on worker threads.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import eigh_tridiagonal


@dataclass
class SparseRealMatrix:
    """Real square matrix in CSR form.

    ``row_ptr`` has length ``n + 1`` with ``row_ptr[n] == nnz``; column
    indices are strictly increasing within each row.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.values)

    def validate(self) -> None:
        if len(self.row_ptr) != self.n + 1:
            raise ValueError("row_ptr length must be n + 1")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.nnz:
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if self.nnz and (self.col_idx.min() < 0 or self.col_idx.max() >= self.n):
            raise ValueError("column index out of range")
        for i in range(self.n):
            cols = self.col_idx[self.row_ptr[i]:self.row_ptr[i + 1]]
            if np.any(np.diff(cols) <= 0):
                raise ValueError(f"columns not strictly increasing in row {i}")


class MatvecCounter:
    """Cumulative count of products with n-by-n operators.

    Diagonal scalings count one each; a fused apply counts one per
    constituent matrix it touches. Increments take a lock so that workers
    sharing a counter cannot lose updates; per-trajectory counters are
    normally private and merged into the global one afterwards.
    """

    __slots__ = ("_count", "_lock")

    def __init__(self) -> None:
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def add(self, k: int = 1) -> None:
        with self._lock:
            self._count += k

    def reset(self) -> None:
        with self._lock:
            self._count = 0

    def merge(self, other: "MatvecCounter") -> None:
        self.add(other.count)


#: Process-wide default counter; library calls fall back to this one when no
#: explicit counter is passed.
GLOBAL_COUNTER = MatvecCounter()


def resolve_counter(counter: MatvecCounter | None) -> MatvecCounter:
    return GLOBAL_COUNTER if counter is None else counter


@njit(cache=True, nogil=True)
def _spmv_kernel(row_ptr, col_idx, values, x, scale, out):
    n = out.shape[0]
    for i in range(n):
        acc = 0.0 + 0.0j
        for p in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[p] * x[col_idx[p]]
        out[i] = scale * acc


@njit(cache=True, nogil=True)
def _pair_kernel(row_ptr, col_idx, vs, va, ws, wa, x, out):
    # out = (ws * S + wa * A) x over the shared pattern
    n = out.shape[0]
    for i in range(n):
        acc_s = 0.0 + 0.0j
        acc_a = 0.0 + 0.0j
        for p in range(row_ptr[i], row_ptr[i + 1]):
            xv = x[col_idx[p]]
            acc_s += vs[p] * xv
            acc_a += va[p] * xv
        out[i] = ws * acc_s + wa * acc_a


@njit(cache=True, nogil=True)
def _fused_kernel(row_ptr, col_idx, vs, va, hd, wd, ws, wa, x, out):
    # out = (wd * diag(hd) + ws * S + wa * A) x in one pattern walk
    n = out.shape[0]
    for i in range(n):
        acc_s = 0.0 + 0.0j
        acc_a = 0.0 + 0.0j
        for p in range(row_ptr[i], row_ptr[i + 1]):
            xv = x[col_idx[p]]
            acc_s += vs[p] * xv
            acc_a += va[p] * xv
        out[i] = wd * hd[i] * x[i] + ws * acc_s + wa * acc_a


def spmv(A: SparseRealMatrix, x: np.ndarray, scale: complex = 1.0,
         counter: MatvecCounter | None = None) -> np.ndarray:
    """Return ``scale * (A @ x)``; increments the counter by one."""
    if len(x) != A.n:
        raise ValueError(f"dimension mismatch: matrix {A.n}, vector {len(x)}")
    out = np.empty(A.n, dtype=np.complex128)
    _spmv_kernel(A.row_ptr, A.col_idx, A.values,
                 np.ascontiguousarray(x, dtype=np.complex128),
                 complex(scale), out)
    resolve_counter(counter).add(1)
    return out


def dense_expm_tridiagonal(alpha: np.ndarray, beta: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i t T)`` for the real symmetric tridiagonal ``T``.

    Parameters
    ----------
    alpha : ndarray, shape (m,)
        Diagonal of ``T``; ``m`` at most 128.
    beta : ndarray, shape (m - 1,)
        Off-diagonal of ``T``.
    t : float
        Time; the result is unitary for any ``t``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    m = len(alpha)
    if m > 128:
        raise ValueError(f"tridiagonal exponential limited to m <= 128, got {m}")
    if len(beta) != max(m - 1, 0):
        raise ValueError("beta must have length m - 1")
    if m == 1:
        return np.array([[np.exp(-1j * t * alpha[0])]], dtype=np.complex128)
    w, q = eigh_tridiagonal(alpha, beta)
    phases = np.exp(-1j * t * w)
    return (q * phases[None, :]) @ q.T
