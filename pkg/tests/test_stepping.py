"""Step-size controller arithmetic and the propagation loops."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hubmag.stepping as stepping
from hubmag.cfm import StepEstimate, cf2_symmetrized_defect_step
from hubmag.sparse import MatvecCounter
from hubmag.stepping import (StepController, propagate_adaptive,
                             propagate_fixed, propose)

from conftest import model_dense_h


def cf2_stepper(model, t, tau, psi, krylov_tol, counter, carry):
    return cf2_symmetrized_defect_step(model, t, tau, psi, krylov_tol,
                                       counter=counter)


# ----- controller -----------------------------------------------------------

def test_propose_at_tolerance():
    ctrl = StepController(tol=1e-6, order=4)
    accept, nxt = propose(ctrl, 0.2, 1e-6)
    assert accept
    assert abs(nxt - 0.9 * 0.2) < 1e-15


def test_propose_zero_estimate_grows_at_cap():
    ctrl = StepController(tol=1e-6, order=4)
    accept, nxt = propose(ctrl, 0.2, 0.0)
    assert accept
    assert abs(nxt - 4.0 * 0.2) < 1e-15


def test_propose_reject_halves():
    # est = 2^(p+1) tol gives a raw factor 0.9 / 2
    ctrl = StepController(tol=1e-8, order=4)
    accept, nxt = propose(ctrl, 0.2, 32.0 * 1e-8)
    assert not accept
    assert abs(nxt - 0.45 * 0.2) < 1e-15


def test_propose_shrink_clamp():
    ctrl = StepController(tol=1e-10, order=2)
    accept, nxt = propose(ctrl, 0.4, 1.0)
    assert not accept
    assert abs(nxt - 0.25 * 0.4) < 1e-15


def test_propose_rejects_bad_arguments():
    ctrl = StepController(tol=1e-6, order=4)
    with pytest.raises(ValueError):
        propose(ctrl, 0.0, 1e-7)
    with pytest.raises(ValueError):
        propose(ctrl, 0.1, -1e-7)


def test_controller_validation():
    with pytest.raises(ValueError):
        StepController(tol=1e-6, order=4, shrink_min=1.5)
    with pytest.raises(ValueError):
        StepController(tol=1e-6, order=4, grow_max=0.5)
    with pytest.raises(ValueError):
        StepController(tol=1e-6, order=4, safety=0.0)


@settings(max_examples=200, deadline=None)
@given(est=st.floats(min_value=0.0, max_value=1e3),
       tol=st.floats(min_value=1e-12, max_value=1e-2),
       tau=st.floats(min_value=1e-6, max_value=10.0),
       order=st.integers(min_value=1, max_value=7))
def test_propose_properties(est, tol, tau, order):
    ctrl = StepController(tol=tol, order=order)
    accept, nxt = propose(ctrl, tau, est)
    assert accept == (est <= tol)
    assert 0.25 * tau - 1e-18 <= nxt <= 4.0 * tau + 1e-12
    if est == tol:
        assert abs(nxt - 0.9 * tau) < 1e-12 * tau


# ----- fixed-step loop ------------------------------------------------------

def test_fixed_single_step_equals_stepper(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    direct = cf2_symmetrized_defect_step(dimer_model, 1.0, 0.5, psi)
    traj = propagate_fixed(cf2_stepper, dimer_model, 1.0, 1.5, 1, psi)
    assert np.array_equal(traj.psi_final, direct.psi_next)
    assert traj.accepted_steps == 1
    assert traj.samples[0].t == 1.5
    assert traj.samples[0].err_est == direct.err_est


def test_fixed_validates_steps(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    with pytest.raises(ValueError):
        propagate_fixed(cf2_stepper, dimer_model, 0.0, 1.0, 0, psi)


def test_fixed_norm_preservation_long_run(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    traj = propagate_fixed(cf2_stepper, dimer_model, 0.0, 10.0, 1000, psi)
    assert abs(np.linalg.norm(traj.psi_final) - 1.0) < 1e-9
    norms = [s.norm for s in traj.samples]
    assert max(abs(n - 1.0) for n in norms) < 1e-9


def test_fixed_counts_work(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    c = MatvecCounter()
    traj = propagate_fixed(cf2_stepper, dimer_model, 0.0, 1.0, 4, psi,
                           counter=c)
    assert traj.matvecs == c.count > 0
    cums = [s.matvecs_cum for s in traj.samples]
    assert cums == sorted(cums)


# ----- adaptive loop --------------------------------------------------------

def test_adaptive_trajectory_invariants(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    tol = 1e-6
    traj = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 3.0, tol, psi,
                              order=2)
    ts = [s.t for s in traj.samples]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert abs(ts[-1] - 3.0) < 1e-12
    assert max(ts) <= 3.0 + 1e-12
    assert all(s.err_est <= tol for s in traj.samples)
    assert all(s.tau > 0 for s in traj.samples)
    assert traj.rejected_steps >= 0
    assert abs(np.linalg.norm(traj.psi_final) - 1.0) < 1e-9


def test_adaptive_first_trial_step(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    # easy tolerance so the first trial is accepted as proposed
    traj = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 0.5, 1e-2, psi,
                              order=2)
    assert abs(traj.samples[0].tau - 0.05) < 1e-15
    traj2 = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 40.0, 1e-2, psi,
                               order=2)
    assert abs(traj2.samples[0].tau - 0.1) < 1e-15


def test_adaptive_deterministic(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[1] = 1.0
    a = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 4.0, 1e-7, psi,
                           order=2)
    b = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 4.0, 1e-7, psi,
                           order=2)
    assert np.array_equal(a.psi_final, b.psi_final)
    assert a.samples == b.samples
    assert a.rejected_steps == b.rejected_steps


def test_adaptive_validates_window(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    with pytest.raises(ValueError):
        propagate_adaptive(cf2_stepper, dimer_model, 1.0, 1.0, 1e-6, psi,
                           order=2)


def test_adaptive_aborts_on_reject_storm(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0

    def hopeless(model, t, tau, u, krylov_tol, counter, carry):
        return StepEstimate(u, 1.0, 0, 0)

    with pytest.raises(RuntimeError, match="consecutive"):
        propagate_adaptive(hopeless, dimer_model, 0.0, 1.0, 1e-9, psi,
                           order=2)


def test_adaptive_aborts_on_step_budget(dimer_model, monkeypatch):
    monkeypatch.setattr(stepping, "_MAX_ACCEPTED", 5)
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0

    def perfect(model, t, tau, u, krylov_tol, counter, carry):
        return StepEstimate(u, 0.0, 0, 0)

    with pytest.raises(RuntimeError, match="1e6|steps"):
        propagate_adaptive(perfect, dimer_model, 0.0, 1e9, 1e-6, psi, order=2)


def test_adaptive_rejections_counted(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    calls = {"n": 0}

    def flaky(model, t, tau, u, krylov_tol, counter, carry):
        calls["n"] += 1
        res = cf2_symmetrized_defect_step(model, t, tau, u, krylov_tol,
                                          counter=counter)
        if calls["n"] == 1:
            return StepEstimate(res.psi_next, 1.0, res.matvecs, res.krylov_m)
        return res

    traj = propagate_adaptive(flaky, dimer_model, 0.0, 1.0, 1e-6, psi,
                              order=2)
    assert traj.rejected_steps >= 1
    # every stepper call ends up counted exactly once
    assert calls["n"] == traj.accepted_steps + traj.rejected_steps


def test_observable_recording_switch(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    on = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 1.0, 1e-6, psi,
                            order=2, record_observables=True)
    off = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 1.0, 1e-6, psi,
                             order=2, record_observables=False)
    assert all(np.isfinite(s.energy) and np.isfinite(s.double_occ)
               for s in on.samples)
    assert all(np.isnan(s.energy) and np.isnan(s.double_occ)
               for s in off.samples)
    # switching recording off must not change the dynamics
    assert np.array_equal(on.psi_final, off.psi_final)


def test_recorded_energy_matches_dense(dimer_model):
    psi = np.zeros(dimer_model.n, dtype=complex)
    psi[0] = 1.0
    traj = propagate_adaptive(cf2_stepper, dimer_model, 0.0, 1.0, 1e-8, psi,
                              order=2)
    s = traj.samples[-1]
    h = model_dense_h(dimer_model, s.t)
    u = traj.psi_final / np.linalg.norm(traj.psi_final)
    want = float(np.real(u.conj() @ (h @ u)))
    assert abs(s.energy - want) < 1e-10
