"""Fourth-order Magnus splitting step ``exp(B/2) exp(A) exp(B/2)``.

The generator is split into a first-order part ``Phi_A`` (full Hamiltonian
with interval-averaged pulse weights) and a second-order part ``Phi_B``
built from the three elementary commutators, whose scalar weights are double
integrals over the triangle ``0 <= x <= y <= 1`` evaluated with a 6-point
degree-4 cubature. ``Phi_B`` is applied matrix-free as six constituent
products; no commutator matrix is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cfm import StepEstimate, gamma_series_apply
from .krylov import HermitianOperator, lanczos_expm
from .model import HubbardModel, pulse_eval
from .sparse import MatvecCounter, resolve_counter

#: Two-point Gauss-Legendre rule on [0, 1]; exact for degree <= 3.
GL_NODES = np.array([0.5 - np.sqrt(1.0 / 12.0), 0.5 + np.sqrt(1.0 / 12.0)])
GL_WEIGHTS = np.array([0.5, 0.5])

#: Six-point cubature on the triangle {0 <= x <= y <= 1}, exact for total
#: degree <= 4; two symmetry orbits mapped from barycentric form.
TRI_X = np.array([0.445948490915965, 0.445948490915965, 0.108103018168070,
                  0.091576213509771, 0.091576213509771, 0.816847572980459])
TRI_Y = np.array([0.554051509084035, 0.891896981831930, 0.554051509084035,
                  0.908423786490229, 0.183152427019541, 0.908423786490229])
TRI_W = np.array([0.111690794839006, 0.111690794839006, 0.111690794839006,
                  0.054975871827661, 0.054975871827661, 0.054975871827661])


@dataclass(frozen=True)
class QuadratureTables:
    """Interval and triangle rules used by the coefficient integrals."""

    gl_nodes: np.ndarray
    gl_weights: np.ndarray
    tri_x: np.ndarray
    tri_y: np.ndarray
    tri_w: np.ndarray


TABLES = QuadratureTables(GL_NODES, GL_WEIGHTS, TRI_X, TRI_Y, TRI_W)


@dataclass(frozen=True)
class StrangCoefficients:
    """Scalar weights of one step: hats for the step itself, checks for the
    defect corrector (directional derivatives of the hats)."""

    c1_hat: float
    s1_hat: float
    c2_hat: float
    s2_hat: float
    r_hat: float
    c1_check: float
    s1_check: float
    c2_check: float
    s2_check: float
    r_check: float


def strang_coefficients(p, t0: float, tau: float) -> StrangCoefficients:
    """Evaluate the pulse integrals for a step from ``t0`` of size ``tau``.

    The check coefficients are the exact directional derivatives
    ``(d/dtau - (1/2) d/dt0)`` of the corresponding hats, with every
    quadrature node evaluation differentiated analytically.
    """
    cx = np.empty(2); sx = np.empty(2); dcx = np.empty(2); dsx = np.empty(2)
    for i, node in enumerate(GL_NODES):
        _, cx[i], sx[i], dcx[i], dsx[i] = pulse_eval(p, t0 + node * tau)
    c1_hat = float(GL_WEIGHTS @ cx)
    s1_hat = float(GL_WEIGHTS @ sx)
    c1_check = float(GL_WEIGHTS @ ((GL_NODES - 0.5) * dcx))
    s1_check = float(GL_WEIGHTS @ ((GL_NODES - 0.5) * dsx))

    cxt = np.empty(6); sxt = np.empty(6); dcxt = np.empty(6); dsxt = np.empty(6)
    cyt = np.empty(6); syt = np.empty(6); dcyt = np.empty(6); dsyt = np.empty(6)
    for i in range(6):
        _, cxt[i], sxt[i], dcxt[i], dsxt[i] = pulse_eval(p, t0 + TRI_X[i] * tau)
        _, cyt[i], syt[i], dcyt[i], dsyt[i] = pulse_eval(p, t0 + TRI_Y[i] * tau)
    c2_hat = 0.5 * float(TRI_W @ (cyt - cxt))
    s2_hat = 0.5 * float(TRI_W @ (syt - sxt))
    r_hat = 0.5 * float(TRI_W @ (cyt * sxt - cxt * syt))
    c2_check = 0.5 * float(TRI_W @ ((TRI_Y - 0.5) * dcyt - (TRI_X - 0.5) * dcxt))
    s2_check = 0.5 * float(TRI_W @ ((TRI_Y - 0.5) * dsyt - (TRI_X - 0.5) * dsxt))
    r_check = 0.5 * float(TRI_W @ ((TRI_Y - 0.5) * dcyt * sxt
                                   + (TRI_X - 0.5) * cyt * dsxt
                                   - (TRI_X - 0.5) * dcxt * syt
                                   - (TRI_Y - 0.5) * cxt * dsyt))
    return StrangCoefficients(c1_hat, s1_hat, c2_hat, s2_hat, r_hat,
                              c1_check, s1_check, c2_check, s2_check, r_check)


def phi_a_apply(model: HubbardModel, sc: StrangCoefficients, v: np.ndarray,
                counter: MatvecCounter | None = None) -> np.ndarray:
    """``Phi_A v`` with ``Phi_A = -i h_diag - i c1_hat h_symm + s1_hat h_anti``."""
    return model.apply_linear(-1j, -1j * sc.c1_hat, sc.s1_hat, v, counter)


def phi_b_apply(model: HubbardModel, sc: StrangCoefficients, v: np.ndarray,
                counter: MatvecCounter | None = None) -> np.ndarray:
    """``Phi_B v`` for the step coefficients; see :func:`phi_b_like_apply`."""
    return phi_b_like_apply(model, sc.c2_hat, sc.s2_hat, sc.r_hat, v, counter)


def phi_b_like_apply(model: HubbardModel, c2: float, s2: float, r: float,
                     v: np.ndarray,
                     counter: MatvecCounter | None = None) -> np.ndarray:
    """Apply ``-c2 [Hs, Hd] - i s2 [Ha, Hd] - i r [Hs, Ha]`` matrix-free.

    Six constituent products, interleaved so only four work vectors live at
    a time; ``i`` times the result is exactly Hermitian.
    """
    counter = resolve_counter(counter)
    h1 = model.apply_diag(v, 1.0, counter)
    h2 = model.apply_symm(v, 1.0, counter)
    h3 = model.apply_anti(v, 1.0, counter)
    h4 = -1j * c2 * h1 + r * h3
    y = model.apply_symm(h4, 1.0, counter)
    h4 = s2 * h1 - r * h2
    y += model.apply_anti(h4, 1.0, counter)
    h4 = -1j * c2 * h2 + s2 * h3
    y -= model.apply_diag(h4, 1.0, counter)
    return -1j * y


def _op_a(model, sc, counter):
    return HermitianOperator(
        apply=lambda v: model.apply_linear(1.0, sc.c1_hat, 1j * sc.s1_hat,
                                           v, counter),
        dim=model.n, norm_hint=model.gershgorin_bound())


def _op_b(model, c2, s2, r, counter):
    return HermitianOperator(
        apply=lambda v: 1j * phi_b_like_apply(model, c2, s2, r, v, counter),
        dim=model.n, norm_hint=None)


def magnus_strang_step(model: HubbardModel, t0: float, tau: float,
                       psi: np.ndarray, krylov_tol: float = 1e-12, *,
                       counter: MatvecCounter | None = None, m_max: int = 60,
                       stats: dict | None = None) -> np.ndarray:
    """One ``exp(tau^2 Phi_B / 2) exp(tau Phi_A) exp(tau^2 Phi_B / 2)`` step."""
    counter = resolve_counter(counter)
    sc = strang_coefficients(model.pulse, t0, tau)
    op_b = _op_b(model, sc.c2_hat, sc.s2_hat, sc.r_hat, counter)
    op_a = _op_a(model, sc, counter)
    r1 = lanczos_expm(op_b, psi, 0.5 * tau * tau, krylov_tol, m_max)
    r2 = lanczos_expm(op_a, r1.w, tau, krylov_tol, m_max)
    r3 = lanczos_expm(op_b, r2.w, 0.5 * tau * tau, krylov_tol, m_max)
    if stats is not None:
        stats["krylov_m"] = max(r1.m, r2.m, r3.m)
        stats["substeps"] = r1.substeps + r2.substeps + r3.substeps
    return r3.w


def magnus_strang_defect_step(model: HubbardModel, t0: float, tau: float,
                              psi: np.ndarray, krylov_tol: float = 1e-12, *,
                              counter: MatvecCounter | None = None,
                              m_max: int = 60,
                              truncation: int = 3) -> StepEstimate:
    """Splitting step with the symmetrized defect estimate.

    The outer factors are corrected by one combined commutator application
    with weights ``tau * hat + (tau^2/2) * check``; the middle factor by the
    truncated series over ``Phi_A`` with the derivative part ``Phi_A``-check.
    """
    counter = resolve_counter(counter)
    c_start = counter.count
    sc = strang_coefficients(model.pulse, t0, tau)
    op_b = _op_b(model, sc.c2_hat, sc.s2_hat, sc.r_hat, counter)
    op_a = _op_a(model, sc, counter)
    gb_c2 = tau * sc.c2_hat + 0.5 * tau * tau * sc.c2_check
    gb_s2 = tau * sc.s2_hat + 0.5 * tau * tau * sc.s2_check
    gb_r = tau * sc.r_hat + 0.5 * tau * tau * sc.r_check

    def apply_gb(v):
        return phi_b_like_apply(model, gb_c2, gb_s2, gb_r, v, counter)

    def apply_a(v):
        return phi_a_apply(model, sc, v, counter)

    def apply_a_check(v):
        return model.apply_linear(0.0, -1j * sc.c1_check, sc.s1_check,
                                  v, counter)

    _, c0v, s0v, _, _ = pulse_eval(model.pulse, t0)
    _, c1v, s1v, _, _ = pulse_eval(model.pulse, t0 + tau)
    u = psi
    d = model.apply_linear(0.5j, 0.5j * c0v, 0.5j * 1j * s0v, psi, counter)
    t_b = 0.5 * tau * tau
    m_seen = 0
    r = lanczos_expm(op_b, u, t_b, krylov_tol, m_max); u = r.w
    m_seen = max(m_seen, r.m)
    r = lanczos_expm(op_b, d, t_b, krylov_tol, m_max); d = r.w
    m_seen = max(m_seen, r.m)
    d = d + apply_gb(u)
    r = lanczos_expm(op_a, u, tau, krylov_tol, m_max); u = r.w
    m_seen = max(m_seen, r.m)
    r = lanczos_expm(op_a, d, tau, krylov_tol, m_max); d = r.w
    m_seen = max(m_seen, r.m)
    d = d + gamma_series_apply(apply_a, apply_a_check, tau, u, truncation)
    r = lanczos_expm(op_b, u, t_b, krylov_tol, m_max); u = r.w
    m_seen = max(m_seen, r.m)
    r = lanczos_expm(op_b, d, t_b, krylov_tol, m_max); d = r.w
    m_seen = max(m_seen, r.m)
    d = d + apply_gb(u)
    d = d + model.apply_linear(0.5j, 0.5j * c1v, 0.5j * 1j * s1v, u, counter)
    est = tau / 5.0 * float(np.linalg.norm(d))
    return StepEstimate(u, est, counter.count - c_start, m_seen)
