"""Splitting-step coefficients against scipy quadrature oracles, the
commutator application against dense matrices, and the defect estimate
against dense local errors."""
import numpy as np
import pytest
from scipy.integrate import dblquad, quad
from scipy.linalg import eigh, expm

from hubmag.basis import enumerate_basis
from hubmag.cfm import gamma_series_apply
from hubmag.model import Geometry, PulseParams, build_model, pulse_eval
from hubmag.strang import (GL_NODES, GL_WEIGHTS, TRI_W, TRI_X, TRI_Y,
                           magnus_strang_defect_step, magnus_strang_step,
                           phi_a_apply, phi_b_like_apply, strang_coefficients)

from conftest import dense_propagate, fit_order, ground_state_dense

PULSE = PulseParams(0.2, 3.5, 2.0, 6.0)


# ----- quadrature rules -----------------------------------------------------

def test_interval_rule_exact_to_degree_three():
    for d in range(4):
        got = float(GL_WEIGHTS @ GL_NODES ** d)
        assert abs(got - 1.0 / (d + 1)) < 1e-12, d
    # degree 4 is the first failure of the 2-point rule
    assert abs(float(GL_WEIGHTS @ GL_NODES ** 4) - 0.2) > 1e-4


def test_triangle_rule_exact_to_degree_three():
    # integral of x^i y^j over {0 <= x <= y <= 1} is 1/((i+1)(i+j+2))
    for i in range(4):
        for j in range(4 - i):
            got = float(TRI_W @ (TRI_X ** i * TRI_Y ** j))
            want = 1.0 / ((i + 1) * (i + j + 2))
            assert abs(got - want) < 1e-12, (i, j)


def test_triangle_rule_geometry():
    assert abs(TRI_W.sum() - 0.5) < 1e-12
    assert np.all(TRI_X <= TRI_Y)
    assert np.all(TRI_X >= 0.0) and np.all(TRI_Y <= 1.0)


# ----- coefficient integrals ------------------------------------------------

def pulse_c(t):
    return pulse_eval(PULSE, t)[1]


def pulse_s(t):
    return pulse_eval(PULSE, t)[2]


def oracle_hats(t0, tau):
    c1, _ = quad(lambda x: pulse_c(t0 + x * tau), 0.0, 1.0, epsabs=1e-13)
    s1, _ = quad(lambda x: pulse_s(t0 + x * tau), 0.0, 1.0, epsabs=1e-13)

    def tri(f):
        val, _ = dblquad(f, 0.0, 1.0, lambda x: x, lambda x: 1.0,
                         epsabs=1e-13)
        return 0.5 * val

    c2 = tri(lambda y, x: pulse_c(t0 + y * tau) - pulse_c(t0 + x * tau))
    s2 = tri(lambda y, x: pulse_s(t0 + y * tau) - pulse_s(t0 + x * tau))
    r = tri(lambda y, x: pulse_c(t0 + y * tau) * pulse_s(t0 + x * tau)
            - pulse_c(t0 + x * tau) * pulse_s(t0 + y * tau))
    return np.array([c1, s1, c2, s2, r])


def hats_of(sc):
    return np.array([sc.c1_hat, sc.s1_hat, sc.c2_hat, sc.s2_hat, sc.r_hat])


def test_hats_match_scipy_quadrature():
    # the hats are fixed-degree quadrature values, so they differ from the
    # exact integrals by the rule truncation error, which shrinks like tau^4
    t0 = 5.3
    gap_coarse = np.abs(hats_of(strang_coefficients(PULSE, t0, 0.1))
                        - oracle_hats(t0, 0.1))
    gap_fine = np.abs(hats_of(strang_coefficients(PULSE, t0, 0.02))
                      - oracle_hats(t0, 0.02))
    assert np.all(gap_coarse < 1e-6)
    assert np.all(gap_fine < 2e-9)


def test_checks_are_directional_derivatives():
    t0, tau, h = 5.3, 0.2, 1e-5
    sc = strang_coefficients(PULSE, t0, tau)
    plus = strang_coefficients(PULSE, t0 - 0.5 * h, tau + h)
    minus = strang_coefficients(PULSE, t0 + 0.5 * h, tau - h)
    for hat, check in (("c1_hat", "c1_check"), ("s1_hat", "s1_check"),
                       ("c2_hat", "c2_check"), ("s2_hat", "s2_check"),
                       ("r_hat", "r_check")):
        fd = (getattr(plus, hat) - getattr(minus, hat)) / (2.0 * h)
        assert abs(getattr(sc, check) - fd) < 1e-8, hat


def test_hats_vanishing_limits():
    # tau -> 0: averages tend to the pointwise values, differences to zero
    t0 = 5.3
    sc = strang_coefficients(PULSE, t0, 1e-8)
    assert abs(sc.c1_hat - pulse_c(t0)) < 1e-7
    assert abs(sc.s1_hat - pulse_s(t0)) < 1e-7
    assert abs(sc.c2_hat) < 1e-8 and abs(sc.s2_hat) < 1e-8
    assert abs(sc.r_hat) < 1e-8


# ----- dense operator oracles -----------------------------------------------

def dense_parts(model):
    n = model.n
    s = np.zeros((n, n)); a = np.zeros((n, n))
    rp, ci = model.h_symm.row_ptr, model.h_symm.col_idx
    for i in range(n):
        for p in range(rp[i], rp[i + 1]):
            s[i, ci[p]] = model.h_symm.values[p]
            a[i, ci[p]] = model.h_anti.values[p]
    return (np.diag(model.h_diag).astype(complex), s.astype(complex),
            a.astype(complex))


def dense_phi_a(model, sc):
    hd, hs, ha = dense_parts(model)
    return -1j * hd - 1j * sc.c1_hat * hs + sc.s1_hat * ha


def dense_phi_b(model, c2, s2, r):
    hd, hs, ha = dense_parts(model)

    def comm(x, y):
        return x @ y - y @ x

    return (-c2 * comm(hs, hd) - 1j * s2 * comm(ha, hd)
            - 1j * r * comm(hs, ha))


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def test_phi_b_matches_dense_commutators(dimer_model):
    v = random_state(dimer_model.n, 40)
    c2, s2, r = 0.013, -0.021, 0.007
    want = dense_phi_b(dimer_model, c2, s2, r) @ v
    got = phi_b_like_apply(dimer_model, c2, s2, r, v)
    assert np.linalg.norm(got - want) < 1e-12


def test_phi_b_generator_is_antihermitian(square_model):
    b = dense_phi_b(square_model, 0.01, 0.02, -0.005)
    assert np.linalg.norm(1j * b - (1j * b).conj().T) < 1e-12


def test_phi_a_matches_dense(dimer_model):
    sc = strang_coefficients(dimer_model.pulse, 5.0, 0.3)
    v = random_state(dimer_model.n, 41)
    want = dense_phi_a(dimer_model, sc) @ v
    got = phi_a_apply(dimer_model, sc, v)
    assert np.linalg.norm(got - want) < 1e-12


def test_step_matches_dense_three_factor_oracle(dimer_model):
    t0, tau = 5.0, 0.2
    psi = random_state(dimer_model.n, 42)
    sc = strang_coefficients(dimer_model.pulse, t0, tau)
    eb = expm(0.5 * tau * tau * dense_phi_b(dimer_model, sc.c2_hat, sc.s2_hat,
                                            sc.r_hat))
    ea = expm(tau * dense_phi_a(dimer_model, sc))
    want = eb @ (ea @ (eb @ psi))
    got = magnus_strang_step(dimer_model, t0, tau, psi)
    assert np.linalg.norm(got - want) < 1e-11


def dense_h_at(model, t):
    hd, hs, ha = dense_parts(model)
    _, c, s, _, _ = pulse_eval(model.pulse, t)
    return hd + c * hs + 1j * s * ha


def test_global_order_four():
    geom = Geometry(1, 2, (-1.0, -0.5))
    model = build_model(geom, enumerate_basis(2, 1, 1), 4.0, PULSE)
    psi = ground_state_dense(dense_h_at(model, 4.0))
    t0, t1 = 4.0, 6.0
    ref = dense_propagate(lambda t: dense_h_at(model, t), psi, t0, t1)
    taus, errs = [], []
    for k in range(1, 6):
        n_steps = int((t1 - t0) * 2 ** k)
        tau = (t1 - t0) / n_steps
        u = psi
        for i in range(n_steps):
            u = magnus_strang_step(model, t0 + i * tau, tau, u)
        taus.append(tau)
        errs.append(np.linalg.norm(u - ref))
    assert abs(fit_order(taus, errs) - 4.0) < 0.4, errs


# ----- defect estimate ------------------------------------------------------

def test_defect_estimate_ratio(dimer_model):
    t0 = 5.0
    psi = ground_state_dense(dense_h_at(dimer_model, t0))
    for k in (5, 6):
        tau = 2.0 ** (-k)
        res = magnus_strang_defect_step(dimer_model, t0, tau, psi)
        exact = dense_propagate(lambda t: dense_h_at(dimer_model, t), psi,
                                t0, t0 + tau)
        true = float(np.linalg.norm(res.psi_next - exact))
        assert 0.5 <= res.err_est / true <= 2.0, (k, res.err_est / true)


def test_defect_estimate_order(dimer_model):
    t0 = 5.0
    psi = ground_state_dense(dense_h_at(dimer_model, t0))
    taus, ests = [], []
    for k in range(2, 7):
        tau = 2.0 ** (-k)
        res = magnus_strang_defect_step(dimer_model, t0, tau, psi)
        taus.append(tau)
        ests.append(res.err_est)
    assert abs(fit_order(taus, ests) - 5.0) < 0.5, ests


def test_defect_step_advances_like_plain_step(dimer_model):
    psi = random_state(dimer_model.n, 43)
    plain = magnus_strang_step(dimer_model, 5.0, 0.1, psi)
    res = magnus_strang_defect_step(dimer_model, 5.0, 0.1, psi)
    assert np.linalg.norm(res.psi_next - plain) < 1e-12


# ----- truncated derivative series ------------------------------------------

def exact_gamma_correction(phi, phi_check, tau):
    """tau * integral_0^1 exp(s tau phi) phi_check exp(-s tau phi) ds for
    anti-Hermitian phi, by eigendecomposition of i phi."""
    lam, q = eigh(1j * phi)
    v = q.conj().T @ phi_check @ q
    delta = -1j * tau * (lam[:, None] - lam[None, :])
    phi1 = np.where(np.abs(delta) < 1e-12, 1.0 + delta / 2.0,
                    np.expm1(delta) / np.where(np.abs(delta) < 1e-12, 1.0,
                                               delta))
    return tau * (q @ (v * phi1) @ q.conj().T)


def test_series_truncation_is_order_six(dimer_model):
    t0 = 5.0
    u = random_state(dimer_model.n, 44)
    taus, gaps = [], []
    for k in range(1, 6):
        tau = 2.0 ** (-k)
        sc = strang_coefficients(dimer_model.pulse, t0, tau)
        phi = dense_phi_a(dimer_model, sc)
        hd, hs, ha = dense_parts(dimer_model)
        phi_check = -1j * sc.c1_check * hs + sc.s1_check * ha
        exact = (phi + exact_gamma_correction(phi, phi_check, tau)) @ u
        got = gamma_series_apply(lambda v: phi @ v, lambda v: phi_check @ v,
                                 tau, u, truncation=3)
        taus.append(tau)
        gaps.append(float(np.linalg.norm(got - exact)))
    assert abs(fit_order(taus, gaps) - 6.0) < 0.7, gaps
