"""Commutator-free Magnus-type steps and their defect-based error estimates.

A scheme is a node vector ``c`` and coefficient matrix ``a``; one step is the
product ``exp(Omega_J) ... exp(Omega_1)`` with
``Omega_j = tau * sum_k a[j,k] A(t0 + c[k] tau)`` and ``A(t) = -i H(t)``.
Because ``H(t)`` is a fixed pattern with time-dependent scalar weights, each
``Omega_j`` collapses to a single weighted combination of the three constant
matrices, applied with the Lanczos propagator.

Error estimates follow the defect threading construction: the defect vector
is carried through the exponential factors alongside the state and corrected
after each factor by a truncated commutator series ``Gamma_j``; symmetric
schemes use the two-sided (symmetrized) variant with both boundary terms,
non-symmetric ones a classical one-sided variant with a deeper series.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .krylov import HermitianOperator, KrylovResult, lanczos_expm
from .model import HubbardModel, pulse_eval
from .sparse import MatvecCounter, resolve_counter

_SQRT3 = np.sqrt(3.0)
_SQRT15 = np.sqrt(15.0)


def _gauss_legendre(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class CFMScheme:
    """Coefficient table of one commutator-free scheme."""

    name: str
    p: int
    c: np.ndarray
    a: np.ndarray
    symmetric: bool

    @property
    def exponentials(self) -> int:
        return self.a.shape[0]


def _make_schemes():
    c_gl2, _ = _gauss_legendre(2)
    c_gl3, _ = _gauss_legendre(3)
    c_gl4, _ = _gauss_legendre(4)
    x = 10.0 * _SQRT15 / 261.0
    table = {
        "cf2": CFMScheme("cf2", 2, np.array([0.5]), np.array([[1.0]]), True),
        "cf4": CFMScheme(
            "cf4", 4, c_gl2,
            np.array([[0.25 + _SQRT3 / 6.0, 0.25 - _SQRT3 / 6.0],
                      [0.25 - _SQRT3 / 6.0, 0.25 + _SQRT3 / 6.0]]), True),
        "cf4o": CFMScheme(
            "cf4o", 4, c_gl3,
            np.array([[37.0 / 240.0 + x, -1.0 / 30.0, 37.0 / 240.0 - x],
                      [-11.0 / 360.0, 23.0 / 45.0, -11.0 / 360.0],
                      [37.0 / 240.0 - x, -1.0 / 30.0, 37.0 / 240.0 + x]]), True),
        "cf4oh": CFMScheme(
            "cf4oh", 4, c_gl3,
            np.array([
                [0.302146842308616954258187683416,
                 -0.030742768872036394116279742324,
                 0.004851603407498684079562131338],
                [-0.029220667938337860559972036973,
                 0.505929982188517232677003929089,
                 -0.029220667938337860559972036973],
                [0.004851603407498684079562131337,
                 -0.030742768872036394116279742324,
                 0.302146842308616954258187683417],
            ]), True),
        "cf6n": CFMScheme(
            "cf6n", 6, c_gl3,
            np.array([
                [0.79124225942889763, -0.080400755305553218, 0.012765293626634554],
                [-0.48931475164583259, 0.054170980027798808, -0.012069823881924156],
                [-0.029025638294289255, 0.50138457552775674, -0.025145341733509552],
                [0.0048759082890019896, -0.030710355805557892, 0.30222764976657693],
            ]), False),
        "cf7": CFMScheme(
            "cf7", 7, c_gl4,
            np.array([
                [0.205862188450411892209, 0.169508382914682544509,
                 -0.102088008415028059851, 0.0304554010755044437431],
                [-0.0574532495795307023280, 0.234286861311879288330,
                 0.332946059487076984706, -0.0703703697036401378340],
                [-0.00893040281749440468751, 0.0271488489365780259156,
                 -0.0295144169823456538040, -0.151311830884601959206],
                [0.552299810755465569835, -3.64425287556240176808,
                 2.53660580449381888484, -0.661436528542997675116],
                [-0.538241659087501080427, 3.60578285850975236760,
                 -2.50685041783117850901, 0.651947409253201845106],
                [0.0203907348473756540850, -0.0664014986792173869631,
                 0.0949735566789294244299, 0.374643341371260411994],
            ]), False),
    }
    return table


_SCHEMES = _make_schemes()


def scheme(name: str) -> CFMScheme:
    """Look up a scheme by registry name (cf2, cf4, cf4o, cf4oh, cf6n, cf7)."""
    try:
        return _SCHEMES[name]
    except KeyError:
        raise KeyError(
            f"unknown scheme {name!r}; available: {', '.join(sorted(_SCHEMES))}")


def scheme_names():
    return sorted(_SCHEMES)


def order_condition_residuals(s: CFMScheme) -> dict:
    """Residuals of the structural conditions the printed tables must satisfy.

    ``total`` is the first-order consistency sum, ``weights`` the distance of
    the column sums from the Gauss-Legendre weights of the node set (the
    condition tying the exponent sum to the underlying quadrature);
    symmetric-declared schemes additionally report the palindrome residuals
    of the coefficient matrix and node vector.
    """
    _, w = _gauss_legendre(len(s.c))
    res = {
        "total": abs(float(s.a.sum()) - 1.0),
        "weights": float(np.max(np.abs(s.a.sum(axis=0) - w))),
    }
    if s.symmetric:
        res["palindrome"] = float(np.max(np.abs(s.a - s.a[::-1, ::-1])))
        res["nodes"] = float(np.max(np.abs(s.c + s.c[::-1] - 1.0)))
    return res


def scheme_screen_passes(s: CFMScheme, tol: float = 1e-12) -> bool:
    """Whether the transcribed (and repaired) table passes the residual screen.

    Schemes failing the screen keep working but their empirical order is
    reported as unverified rather than asserted.
    """
    return all(v <= tol for v in order_condition_residuals(s).values())


@dataclass
class StepEstimate:
    """One step with a local error estimate attached."""

    psi_next: np.ndarray
    err_est: float
    matvecs: int
    krylov_m: int = 0


# ----- shared helpers -------------------------------------------------------

def _node_weights(s: CFMScheme, model: HubbardModel, t0: float, tau: float):
    """Per-factor weights of diag / symm / anti and the node pulse values."""
    cs = np.empty(len(s.c))
    ss = np.empty(len(s.c))
    dcs = np.empty(len(s.c))
    dss = np.empty(len(s.c))
    for k, ck in enumerate(s.c):
        _, cs[k], ss[k], dcs[k], dss[k] = pulse_eval(model.pulse, t0 + ck * tau)
    alpha = s.a.sum(axis=1)
    beta = s.a @ cs
    gamma = s.a @ ss
    return alpha, beta, gamma, cs, ss, dcs, dss


def _factor_op(model: HubbardModel, alpha: float, beta: float, gamma: float,
               counter: MatvecCounter) -> HermitianOperator:
    """Hermitian ``i B_j = alpha h_diag + beta h_symm + i gamma h_anti``."""
    return HermitianOperator(
        apply=lambda v: model.apply_linear(alpha, beta, 1j * gamma, v, counter),
        dim=model.n, norm_hint=model.gershgorin_bound())


def gamma_series_apply(apply_x, apply_y, tau: float, v: np.ndarray,
                       truncation: int = 3) -> np.ndarray:
    """``(X + sum_{m=0}^{M} tau^(m+1)/(m+1)! ad_X^m(Y)) v`` matrix-free.

    Expands the nested commutators into ``X^(m-i) Y X^i`` words and groups
    them by the rightmost power, so the cost is ``M + M(M+1)/2`` applications
    of ``X`` and ``M + 1`` of ``Y`` (13 total operator applications at the
    default depth 3).
    """
    m_top = truncation
    powers = [v]
    for _ in range(m_top):
        powers.append(apply_x(powers[-1]))
    coef = np.empty(m_top + 1)
    fac = 1.0
    for m in range(m_top + 1):
        fac *= (m + 1)
        coef[m] = tau ** (m + 1) / fac
    out = apply_x(powers[-1]) if m_top == 0 else powers[1].copy()
    for i in range(m_top + 1):
        g = apply_y(powers[i])
        sign = -1.0 if i & 1 else 1.0
        acc = (sign * coef[m_top] * comb(m_top, i)) * g
        for m in range(m_top - 1, i - 1, -1):
            acc = apply_x(acc)
            acc += (sign * coef[m] * comb(m, i)) * g
        out = out + acc
    return out


# ----- plain steps ----------------------------------------------------------

def cfm_step(s: CFMScheme, model: HubbardModel, t0: float, tau: float,
             psi: np.ndarray, krylov_tol: float = 1e-12, *,
             counter: MatvecCounter | None = None, m_max: int = 60,
             stats: dict | None = None) -> np.ndarray:
    """One commutator-free step; returns the propagated state.

    ``stats``, when given, receives the summed Krylov metadata of the
    factor exponentials.
    """
    counter = resolve_counter(counter)
    alpha, beta, gamma, *_ = _node_weights(s, model, t0, tau)
    u = psi
    m_seen = 0
    substeps = 0
    for j in range(s.exponentials):
        op = _factor_op(model, alpha[j], beta[j], gamma[j], counter)
        res = lanczos_expm(op, u, tau, krylov_tol, m_max)
        u = res.w
        m_seen = max(m_seen, res.m)
        substeps += res.substeps
    if stats is not None:
        stats["krylov_m"] = m_seen
        stats["substeps"] = substeps
    return u


def magnus4_step(model: HubbardModel, t0: float, tau: float, psi: np.ndarray,
                 krylov_tol: float = 1e-12, *,
                 counter: MatvecCounter | None = None, m_max: int = 60,
                 stats: dict | None = None) -> np.ndarray:
    """Fourth-order Magnus step with one explicit commutator.

    ``Omega = (tau/2)(A_1 + A_2) - (sqrt(3)/12) tau^2 [A_1, A_2]`` at the
    two Gauss nodes; applied as ``exp(-i t M)`` with the Hermitian
    ``M = i Omega / tau``, six constituent products per Krylov iteration.
    """
    counter = resolve_counter(counter)
    op = _magnus4_operator(model, t0, tau, counter)
    res = lanczos_expm(op, psi, tau, krylov_tol, m_max)
    if stats is not None:
        stats["krylov_m"] = res.m
        stats["substeps"] = res.substeps
    return res.w


def _commutator_triple_apply(model, mu, nu, xi, d0, sv, av, counter):
    """Apply ``mu [Hd,Hs] + nu [Hd,Ha] + xi [Hs,Ha]`` given the three
    constituent products of the argument vector (which are reused, so only
    the three second-stage products are charged)."""
    t1 = model.apply_diag(mu * sv + nu * av, 1.0, counter)
    t2 = model.apply_symm(mu * d0 - xi * av, 1.0, counter)
    t3 = model.apply_anti(nu * d0 + xi * sv, 1.0, counter)
    return t1 - t2 - t3


def _magnus4_operator(model: HubbardModel, t0: float, tau: float,
                      counter: MatvecCounter) -> HermitianOperator:
    c_nodes, _ = _gauss_legendre(2)
    _, c1, s1, _, _ = pulse_eval(model.pulse, t0 + c_nodes[0] * tau)
    _, c2, s2, _, _ = pulse_eval(model.pulse, t0 + c_nodes[1] * tau)
    mu = c2 - c1
    nu = 1j * (s2 - s1)
    xi = 1j * (c1 * s2 - s1 * c2)
    w_comm = 1j * (_SQRT3 / 12.0) * tau

    def apply(v):
        d0 = model.apply_diag(v, 1.0, counter)
        sv = model.apply_symm(v, 1.0, counter)
        av = model.apply_anti(v, 1.0, counter)
        lin = d0 + 0.5 * (c1 + c2) * sv + 0.5j * (s1 + s2) * av
        com = _commutator_triple_apply(model, mu, nu, xi, d0, sv, av, counter)
        # i Omega / tau = (H_1 + H_2)/2 + i (sqrt3/12) tau [H_1, H_2]
        return lin + w_comm * com

    return HermitianOperator(apply=apply, dim=model.n,
                             norm_hint=model.gershgorin_bound())


# ----- defect-based estimating steps ---------------------------------------

def cf2_symmetrized_defect_step(model: HubbardModel, t0: float, tau: float,
                                psi: np.ndarray, krylov_tol: float = 1e-12, *,
                                counter: MatvecCounter | None = None,
                                m_max: int = 60) -> StepEstimate:
    """Exponential midpoint step with the closed-form symmetrized defect.

    ``D = S (A_mid - A_0/2) - (A_1/2) S`` applied to the state; the estimate
    is ``(tau/3) ||D psi||``.
    """
    counter = resolve_counter(counter)
    c0 = counter.count
    _, cm, sm, _, _ = pulse_eval(model.pulse, t0 + 0.5 * tau)
    _, ca, sa, _, _ = pulse_eval(model.pulse, t0)
    _, cb, sb, _, _ = pulse_eval(model.pulse, t0 + tau)
    op = _factor_op(model, 1.0, cm, sm, counter)
    res = lanczos_expm(op, psi, tau, krylov_tol, m_max)
    # A_mid - A_0/2 collapses to one fused product
    lead = model.apply_linear(-0.5j, -1j * (cm - 0.5 * ca),
                              sm - 0.5 * sa, psi, counter)
    res_d = lanczos_expm(op, lead, tau, krylov_tol, m_max)
    tail = model.apply_linear(-1j, -1j * cb, sb, res.w, counter)
    d = res_d.w - 0.5 * tail
    return StepEstimate(res.w, tau / 3.0 * float(np.linalg.norm(d)),
                        counter.count - c0, max(res.m, res_d.m))


def cfm_symmetrized_defect_step(s: CFMScheme, model: HubbardModel, t0: float,
                                tau: float, psi: np.ndarray,
                                krylov_tol: float = 1e-12, *,
                                counter: MatvecCounter | None = None,
                                m_max: int = 60, truncation: int = 3
                                ) -> StepEstimate:
    """Step with the two-sided defect estimate, for symmetric schemes.

    The defect vector starts as ``(i/2) H(t0) psi``, is propagated through
    each factor, corrected by the truncated series
    ``Gamma_j = B_j + sum_m tau^(m+1)/(m+1)! ad^m_{B_j}(Phi_j)`` with
    ``Phi_j = sum_k a[j,k] (c_k - 1/2) A'(t0 + c_k tau)``, and closed with
    ``(i/2) H(t0 + tau)``; the estimate is ``tau/(p+1) ||d||``.
    """
    if not s.symmetric:
        raise ValueError(
            f"symmetrized defect requires a symmetric scheme, not {s.name!r}")
    return _threaded_defect(s, model, t0, tau, psi, krylov_tol,
                            counter=counter, m_max=m_max,
                            truncation=truncation, symmetrized=True)


def cfm_classical_defect_step(s: CFMScheme, model: HubbardModel, t0: float,
                              tau: float, psi: np.ndarray,
                              krylov_tol: float = 1e-12, *,
                              counter: MatvecCounter | None = None,
                              m_max: int = 60, truncation: int | None = None
                              ) -> StepEstimate:
    """One-sided defect estimate, valid for any scheme.

    The series depth must reach the scheme order for the estimate to be
    asymptotically correct, so ``truncation`` defaults to ``p``. Used for
    the non-symmetric high-order schemes where the symmetrized variant does
    not apply.
    """
    if truncation is None:
        truncation = s.p
    return _threaded_defect(s, model, t0, tau, psi, krylov_tol,
                            counter=counter, m_max=m_max,
                            truncation=truncation, symmetrized=False)


def _threaded_defect(s, model, t0, tau, psi, krylov_tol, *, counter, m_max,
                     truncation, symmetrized):
    counter = resolve_counter(counter)
    c_start = counter.count
    alpha, beta, gamma, cs, ss, dcs, dss = _node_weights(s, model, t0, tau)
    shift = 0.5 if symmetrized else 0.0
    node_w = s.c - shift
    u = psi
    if symmetrized:
        _, c0v, s0v, _, _ = pulse_eval(model.pulse, t0)
        d = model.apply_linear(0.5j, 0.5j * c0v, 0.5j * 1j * s0v, psi, counter)
    else:
        d = np.zeros_like(psi, dtype=np.complex128)
    m_seen = 0
    for j in range(s.exponentials):
        op = _factor_op(model, alpha[j], beta[j], gamma[j], counter)
        # A' = -i (c' h_symm + i s' h_anti), node-weighted per factor
        yc = float(s.a[j] @ (node_w * dcs))
        ys = float(s.a[j] @ (node_w * dss))

        def apply_b(v, a=alpha[j], b=beta[j], g=gamma[j]):
            return model.apply_linear(-1j * a, -1j * b, g, v, counter)

        def apply_phi(v, yc=yc, ys=ys):
            return model.apply_linear(0.0, -1j * yc, ys, v, counter)

        res_u = lanczos_expm(op, u, tau, krylov_tol, m_max)
        u = res_u.w
        m_seen = max(m_seen, res_u.m)
        if np.linalg.norm(d) > 0.0:
            res_d = lanczos_expm(op, d, tau, krylov_tol, m_max)
            d = res_d.w
            m_seen = max(m_seen, res_d.m)
        d = d + gamma_series_apply(apply_b, apply_phi, tau, u, truncation)
    _, c1v, s1v, _, _ = pulse_eval(model.pulse, t0 + tau)
    if symmetrized:
        d = d + model.apply_linear(0.5j, 0.5j * c1v, 0.5j * 1j * s1v, u, counter)
    else:
        d = d - model.apply_linear(-1j, -1j * c1v, s1v, u, counter)
    est = tau / (s.p + 1.0) * float(np.linalg.norm(d))
    return StepEstimate(u, est, counter.count - c_start, m_seen)


def magnus4_defect_step(model: HubbardModel, t0: float, tau: float,
                        psi: np.ndarray, krylov_tol: float = 1e-12, *,
                        counter: MatvecCounter | None = None,
                        m_max: int = 60, truncation: int = 3) -> StepEstimate:
    """Magnus step with symmetrized defect estimate.

    ``Gamma = Phi + sum_m tau^(m+1)/(m+1)! ad^m_Phi(Psi)`` where ``Phi`` is
    the step exponent over ``tau`` and ``Psi`` collects the explicit
    derivative and commutator corrections.
    """
    counter = resolve_counter(counter)
    c_start = counter.count
    op = _magnus4_operator(model, t0, tau, counter)
    c_nodes, _ = _gauss_legendre(2)
    _, c1, s1, dc1, ds1 = pulse_eval(model.pulse, t0 + c_nodes[0] * tau)
    _, c2, s2, dc2, ds2 = pulse_eval(model.pulse, t0 + c_nodes[1] * tau)

    def apply_phi(v):
        # Phi = Omega / tau, so i Phi is exactly the step operator
        return -1j * op.apply(v)

    # Psi = (sqrt3/12)(A'_2 - A'_1) - (sqrt3/12)[A_1,A_2]
    #       - (tau/24)([A_1,A'_2] - [A'_1,A_2]); the commutators collapse
    # onto the [Hd,Hs] / [Hd,Ha] / [Hs,Ha] triple.
    w_lin = _SQRT3 / 12.0
    mu = (_SQRT3 / 12.0) * (c2 - c1) + (tau / 24.0) * (dc1 + dc2)
    nu = 1j * ((_SQRT3 / 12.0) * (s2 - s1) + (tau / 24.0) * (ds1 + ds2))
    xi = 1j * ((_SQRT3 / 12.0) * (c1 * s2 - s1 * c2)
               + (tau / 24.0) * ((c1 * ds2 - s1 * dc2)
                                 - (dc1 * s2 - ds1 * c2)))

    def apply_psi(v):
        lead = model.apply_linear(0.0, -1j * w_lin * (dc2 - dc1),
                                  w_lin * (ds2 - ds1), v, counter)
        d0 = model.apply_diag(v, 1.0, counter)
        sv = model.apply_symm(v, 1.0, counter)
        av = model.apply_anti(v, 1.0, counter)
        com = _commutator_triple_apply(model, mu, nu, xi, d0, sv, av, counter)
        return lead + com

    res = lanczos_expm(op, psi, tau, krylov_tol, m_max)
    u = res.w
    _, c0v, s0v, _, _ = pulse_eval(model.pulse, t0)
    _, c1v, s1v, _, _ = pulse_eval(model.pulse, t0 + tau)
    d0_vec = model.apply_linear(0.5j, 0.5j * c0v, 0.5j * 1j * s0v, psi, counter)
    res_d = lanczos_expm(op, d0_vec, tau, krylov_tol, m_max)
    d = res_d.w + gamma_series_apply(apply_phi, apply_psi, tau, u, truncation)
    d = d + model.apply_linear(0.5j, 0.5j * c1v, 0.5j * 1j * s1v, u, counter)
    est = tau / 5.0 * float(np.linalg.norm(d))
    return StepEstimate(u, est, counter.count - c_start,
                        max(res.m, res_d.m))
