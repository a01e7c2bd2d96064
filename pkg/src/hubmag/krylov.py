"""Adaptive Lanczos evaluation of ``exp(-i t Omega) v`` for Hermitian operators.

The subspace is grown one vector at a time with full reorthogonalization
(two-pass classical Gram-Schmidt) until the a-posteriori bound

    ||L_m(t) v|| <= beta_m * (prod_{j<m} beta_j) * t^m / m!

drops below ``tol * ||v||``. If ``m_max`` is insufficient, the time interval
is bisected recursively and the two halves are solved in sequence.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, log
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .sparse import dense_expm_tridiagonal


class ConvergenceError(RuntimeError):
    """Raised when the Krylov iteration cannot reach the requested accuracy."""


@dataclass
class HermitianOperator:
    """Matrix-free Hermitian operator: an apply callback plus its dimension."""

    apply: Callable[[np.ndarray], np.ndarray]
    dim: int
    norm_hint: float | None = None


@dataclass
class KrylovResult:
    """Outcome of one (possibly substepped) exponential evaluation.

    ``m`` is the largest Krylov dimension used; ``bound`` the accumulated
    error bound; ``substeps`` the number of time sub-intervals.
    """

    w: np.ndarray
    m: int
    bound: float
    matvecs: int
    substeps: int


def _log_bound(log_beta_prod: float, beta_m: float, t: float, m: int) -> float:
    if beta_m <= 0.0 or t == 0.0:
        return -np.inf
    return log(beta_m) + log_beta_prod + m * log(abs(t)) - lgamma(m + 1)


def lanczos_expm(op: HermitianOperator, v: np.ndarray, t: float, tol: float,
                 m_max: int = 60, _depth: int = 0) -> KrylovResult:
    """Approximate ``exp(-i t Omega) v`` to within ``tol * ||v||``.

    Parameters
    ----------
    op : HermitianOperator
        The Hermitian ``Omega`` as an apply callback. Matvec accounting
        happens inside the callback, not here; ``KrylovResult.matvecs``
        reports the number of callback invocations.
    v : ndarray
        Nonzero start vector; not modified.
    t : float
        Time; the propagator is unitary, ``||w|| = ||v||``.
    tol : float
        Relative bound target.
    m_max : int
        Krylov dimension at which time bisection kicks in.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        raise ValueError("start vector must be nonzero")
    v = np.ascontiguousarray(v, dtype=np.complex128)
    if t == 0.0:
        return KrylovResult(v.copy(), 1, 0.0, 0, 1)

    n = op.dim
    m_cap = min(m_max, n)
    big = np.empty((m_cap + 1, n), dtype=np.complex128)
    alpha = np.empty(m_cap)
    beta = np.empty(m_cap)
    big[0] = v / norm_v
    log_beta_prod = 0.0
    scale_ref = op.norm_hint if op.norm_hint else 0.0
    matvecs = 0
    m_used = 0
    converged = False
    exact = False

    for j in range(m_cap):
        w = op.apply(big[j])
        matvecs += 1
        a_j = float(np.real(np.vdot(big[j], w)))
        alpha[j] = a_j
        w -= a_j * big[j]
        if j > 0:
            w -= beta[j - 1] * big[j - 1]
        # full reorthogonalization, two passes
        block = big[:j + 1]
        for _ in range(2):
            w -= block.T @ (block.conj() @ w)
        b_j = float(np.linalg.norm(w))
        beta[j] = b_j
        m_used = j + 1
        scale_ref = max(scale_ref, abs(a_j), b_j)
        if b_j <= 1e-14 * max(scale_ref, 1e-300):
            converged = True
            exact = True
            break
        lb = _log_bound(log_beta_prod, b_j, t, m_used)
        if lb <= log(tol * norm_v):
            converged = True
            break
        log_beta_prod += log(b_j)
        big[j + 1] = w / b_j

    if converged:
        u = dense_expm_tridiagonal(alpha[:m_used],
                                   beta[:m_used - 1] if m_used > 1 else np.empty(0),
                                   t)
        w_out = norm_v * (u[:, 0] @ big[:m_used])
        bound = 0.0 if exact else float(np.exp(
            _log_bound(log_beta_prod, beta[m_used - 1], t, m_used)))
        return KrylovResult(w_out, m_used, bound, matvecs, 1)

    # subspace exhausted: bisect the time interval
    if _depth >= 30:
        raise ConvergenceError(
            f"Krylov bisection exceeded depth 30 (m_max={m_max}, t={t})")
    first = lanczos_expm(op, v, 0.5 * t, 0.5 * tol, m_max, _depth + 1)
    second = lanczos_expm(op, first.w, 0.5 * t, 0.5 * tol, m_max, _depth + 1)
    return KrylovResult(second.w, max(first.m, second.m),
                        first.bound + second.bound,
                        matvecs + first.matvecs + second.matvecs,
                        first.substeps + second.substeps)


def lanczos_expm_fixed(op: HermitianOperator, v: np.ndarray, t: float,
                       m: int) -> KrylovResult:
    """Exponential from a fixed ``m``-dimensional Krylov space, with bound.

    Stops early only on happy breakdown. Used where the subspace size is
    known to be sufficient for the whole propagation, and by the bound
    validation tests.
    """
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        raise ValueError("start vector must be nonzero")
    v = np.ascontiguousarray(v, dtype=np.complex128)
    n = op.dim
    m = min(m, n)
    big = np.empty((m + 1, n), dtype=np.complex128)
    alpha = np.empty(m)
    beta = np.empty(m)
    big[0] = v / norm_v
    log_beta_prod = 0.0
    matvecs = 0
    exact = False
    m_used = m
    for j in range(m):
        w = op.apply(big[j])
        matvecs += 1
        a_j = float(np.real(np.vdot(big[j], w)))
        alpha[j] = a_j
        w -= a_j * big[j]
        if j > 0:
            w -= beta[j - 1] * big[j - 1]
        block = big[:j + 1]
        for _ in range(2):
            w -= block.T @ (block.conj() @ w)
        b_j = float(np.linalg.norm(w))
        beta[j] = b_j
        if b_j <= 1e-14 * max(abs(a_j), b_j, op.norm_hint or 0.0, 1e-300):
            m_used = j + 1
            exact = True
            break
        if j < m - 1:
            log_beta_prod += log(b_j)
            big[j + 1] = w / b_j
    u = dense_expm_tridiagonal(alpha[:m_used],
                               beta[:m_used - 1] if m_used > 1 else np.empty(0),
                               t)
    w_out = norm_v * (u[:, 0] @ big[:m_used])
    bound = 0.0 if (exact or t == 0.0) else float(np.exp(
        _log_bound(log_beta_prod, beta[m_used - 1], t, m_used)))
    return KrylovResult(w_out, m_used, bound, matvecs, 1)


def lanczos_extremal(op: HermitianOperator, tol: float = 1e-6,
                     m_max: int = 400, seed: int = 7,
                     want_vector: bool = False):
    """Extremal eigenvalues (and optionally the lowest eigenvector).

    Grows the reorthogonalized Krylov space until both extremal Ritz values
    move less than ``tol / 10`` between checks and their residual bounds
    ``beta_m |q[m-1]|`` fall below ``tol``.

    Returns ``(lam_min, lam_max, vec_or_None)``.
    """
    n = op.dim
    rng = np.random.default_rng(seed)
    v0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    v0 /= np.linalg.norm(v0)
    m_cap = min(m_max, n)
    # keep the workspace below ~3 GB even for the largest lattice
    mem_cap = max(int(3e9 / (16 * n)), 32)
    m_cap = min(m_cap, mem_cap)
    big = np.empty((m_cap, n), dtype=np.complex128)
    alpha = np.empty(m_cap)
    beta = np.empty(m_cap)
    big[0] = v0
    prev = (np.inf, -np.inf)
    m_used = m_cap
    for j in range(m_cap):
        w = op.apply(big[j])
        a_j = float(np.real(np.vdot(big[j], w)))
        alpha[j] = a_j
        w -= a_j * big[j]
        if j > 0:
            w -= beta[j - 1] * big[j - 1]
        block = big[:j + 1]
        for _ in range(2):
            w -= block.T @ (block.conj() @ w)
        b_j = float(np.linalg.norm(w))
        beta[j] = b_j
        if b_j <= 1e-13 * max(abs(a_j), 1.0, op.norm_hint or 0.0):
            m_used = j + 1
            break
        if j >= 8 and (j % 5 == 0 or j == m_cap - 1):
            ritz, q = eigh_tridiagonal(alpha[:j + 1], beta[:j])
            res_lo = b_j * abs(q[j, 0])
            res_hi = b_j * abs(q[j, -1])
            moved = max(abs(ritz[0] - prev[0]), abs(ritz[-1] - prev[1]))
            prev = (ritz[0], ritz[-1])
            if res_lo < tol and res_hi < tol and moved < tol / 10.0:
                m_used = j + 1
                break
        if j < m_cap - 1:
            big[j + 1] = w / b_j
    else:  # pragma: no cover - loop always breaks or exhausts m_cap
        m_used = m_cap
    ritz, q = eigh_tridiagonal(alpha[:m_used], beta[:m_used - 1])
    vec = None
    if want_vector:
        vec = q[:, 0] @ big[:m_used]
        vec = vec / np.linalg.norm(vec)
    return float(ritz[0]), float(ritz[-1]), vec
