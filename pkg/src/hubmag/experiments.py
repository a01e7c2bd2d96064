"""Experiment families behind the CLI: convergence, work-precision, traces.

All experiments start from the ground state of ``H(t0)`` and measure errors
as the 2-norm of the final-time state difference against a reference: a
high-order dense integration for small lattices (6 sites or fewer), an
adaptive cf4oh run at tolerance 1e-11 otherwise. CSV outputs carry a
'#'-prefixed metadata block and are byte-identical across reruns of the
same specification.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import cfm, rk, strang
from .krylov import HermitianOperator, lanczos_extremal
from .model import HubbardModel, pulse_eval
from .sparse import GLOBAL_COUNTER, MatvecCounter
from .stepping import Trajectory, propagate_adaptive, propagate_fixed

CODE_VERSION = "0.1.0"
KRYLOV_TOL_DEFAULT = 1e-12
REFERENCE_TOL = 1e-11
_DENSE_REFERENCE_MAX_SITES = 6

CONVERGENCE_COLUMNS = ("method", "tau", "error_l2_vs_reference", "matvecs")
WORKPREC_COLUMNS = ("method", "tol", "achieved_error", "matvecs",
                    "steps_accepted", "steps_rejected", "quotient")
TRACE_COLUMNS = ("t", "tau", "norm", "energy", "double_occ", "err_est",
                 "matvecs_cum", "krylov_m")


@dataclass(frozen=True)
class MethodInfo:
    name: str
    order: int
    exponential: bool


_METHOD_ORDER = ("cf2", "cf4", "cf4o", "cf4oh", "cf6n", "cf7",
                 "magnus4", "magnusstrang4", "dopri45")

METHODS = {
    "cf2": MethodInfo("cf2", 2, True),
    "cf4": MethodInfo("cf4", 4, True),
    "cf4o": MethodInfo("cf4o", 4, True),
    "cf4oh": MethodInfo("cf4oh", 4, True),
    "cf6n": MethodInfo("cf6n", 6, True),
    "cf7": MethodInfo("cf7", 7, True),
    "magnus4": MethodInfo("magnus4", 4, True),
    "magnusstrang4": MethodInfo("magnusstrang4", 4, True),
    "dopri45": MethodInfo("dopri45", 4, False),
}


def method_info(name: str) -> MethodInfo:
    try:
        return METHODS[name]
    except KeyError:
        raise KeyError(f"unknown method {name!r}; "
                       f"available: {', '.join(_METHOD_ORDER)}")


def plain_stepper(name: str):
    """Uniform stepper without an estimate (used on fixed grids)."""
    info = method_info(name)
    if name == "dopri45":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return rk.dopri45_step(model, t0, tau, psi, counter=counter,
                                   carry=carry)
        return step
    if name == "magnus4":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            stats = {}
            w = cfm.magnus4_step(model, t0, tau, psi, krylov_tol,
                                 counter=counter, stats=stats)
            return cfm.StepEstimate(w, 0.0, 0, stats.get("krylov_m", 0))
        return step
    if name == "magnusstrang4":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            stats = {}
            w = strang.magnus_strang_step(model, t0, tau, psi, krylov_tol,
                                          counter=counter, stats=stats)
            return cfm.StepEstimate(w, 0.0, 0, stats.get("krylov_m", 0))
        return step
    sch = cfm.scheme(name)

    def step(model, t0, tau, psi, krylov_tol, counter, carry):
        stats = {}
        w = cfm.cfm_step(sch, model, t0, tau, psi, krylov_tol,
                         counter=counter, stats=stats)
        return cfm.StepEstimate(w, 0.0, 0, stats.get("krylov_m", 0))
    return step


def estimating_stepper(name: str):
    """Stepper with a defect (or embedded) local error estimate."""
    if name == "dopri45":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return rk.dopri45_step(model, t0, tau, psi, counter=counter,
                                   carry=carry)
        return step
    if name == "magnus4":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return cfm.magnus4_defect_step(model, t0, tau, psi, krylov_tol,
                                           counter=counter)
        return step
    if name == "magnusstrang4":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return strang.magnus_strang_defect_step(model, t0, tau, psi,
                                                    krylov_tol,
                                                    counter=counter)
        return step
    if name == "cf2":
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return cfm.cf2_symmetrized_defect_step(model, t0, tau, psi,
                                                   krylov_tol,
                                                   counter=counter)
        return step
    sch = cfm.scheme(name)
    if sch.symmetric:
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return cfm.cfm_symmetrized_defect_step(sch, model, t0, tau, psi,
                                                   krylov_tol,
                                                   counter=counter)
    else:
        def step(model, t0, tau, psi, krylov_tol, counter, carry):
            return cfm.cfm_classical_defect_step(sch, model, t0, tau, psi,
                                                 krylov_tol, counter=counter)
    return step


# ----- initial state and references ----------------------------------------

def ground_state(model: HubbardModel, t: float) -> np.ndarray:
    """Lowest eigenvector of ``H(t)``, deterministic and normalized."""
    _, c, s, _, _ = pulse_eval(model.pulse, t)
    if model.n <= 1200:
        h = _dense_h(model, t)
        _, vecs = np.linalg.eigh(h)
        v = vecs[:, 0].astype(np.complex128)
        return v / np.linalg.norm(v)
    op = HermitianOperator(
        apply=lambda v: model.apply_linear(1.0, c, 1j * s, v),
        dim=model.n, norm_hint=model.gershgorin_bound())
    _, _, vec = lanczos_extremal(op, tol=1e-9, want_vector=True)
    # one refinement pass started from the Ritz vector sharpens the tail
    op2 = HermitianOperator(
        apply=op.apply, dim=model.n, norm_hint=model.gershgorin_bound())
    vec = _refine_lowest(op2, vec)
    return vec


def _refine_lowest(op, v0, m: int = 80):
    from scipy.linalg import eigh_tridiagonal

    n = op.dim
    m = min(m, n)
    big = np.empty((m, n), dtype=np.complex128)
    alpha = np.empty(m)
    beta = np.empty(m)
    big[0] = v0 / np.linalg.norm(v0)
    m_used = m
    for j in range(m):
        w = op.apply(big[j])
        alpha[j] = float(np.real(np.vdot(big[j], w)))
        w -= alpha[j] * big[j]
        if j > 0:
            w -= beta[j - 1] * big[j - 1]
        block = big[:j + 1]
        for _ in range(2):
            w -= block.T @ (block.conj() @ w)
        beta[j] = float(np.linalg.norm(w))
        if beta[j] < 1e-13 * max(1.0, abs(alpha[j])):
            m_used = j + 1
            break
        if j < m - 1:
            big[j + 1] = w / beta[j]
    _, q = eigh_tridiagonal(alpha[:m_used], beta[:m_used - 1])
    vec = q[:, 0] @ big[:m_used]
    return vec / np.linalg.norm(vec)


def _dense_h(model: HubbardModel, t: float) -> np.ndarray:
    _, c, s, _, _ = pulse_eval(model.pulse, t)
    n = model.n
    h = np.zeros((n, n), dtype=np.complex128)
    rp, ci = model.h_symm.row_ptr, model.h_symm.col_idx
    vs, va = model.h_symm.values, model.h_anti.values
    for i in range(n):
        for p in range(rp[i], rp[i + 1]):
            h[i, ci[p]] = c * vs[p] + 1j * s * va[p]
    h[np.arange(n), np.arange(n)] += model.h_diag
    return h


def reference_solution(model: HubbardModel, t0: float, t_end: float,
                       psi0: np.ndarray) -> np.ndarray:
    """Final-time reference state for error measurements."""
    if model.basis.n_sites <= _DENSE_REFERENCE_MAX_SITES:
        return _dense_reference(model, t0, t_end, psi0)
    scratch = MatvecCounter()
    traj = propagate_adaptive(
        estimating_stepper("cf4oh"), model, t0, t_end, REFERENCE_TOL, psi0,
        order=4, krylov_tol=KRYLOV_TOL_DEFAULT, counter=scratch,
        record_observables=False)
    return traj.psi_final


def _dense_reference(model, t0, t_end, psi0):
    from scipy.integrate import solve_ivp

    n = model.n
    scratch = MatvecCounter()

    def rhs(t, y):
        yc = y[:n] + 1j * y[n:]
        dy = model.apply_linear(-1j, *_a_weights(model, t), yc, scratch)
        return np.concatenate([dy.real, dy.imag])

    y0 = np.concatenate([psi0.real, psi0.imag])
    sol = solve_ivp(rhs, (t0, t_end), y0, method="DOP853",
                    rtol=1e-13, atol=1e-13, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"dense reference integration failed: {sol.message}")
    yf = sol.y[:, -1]
    return yf[:n] + 1j * yf[n:]


def _a_weights(model, t):
    _, c, s, _, _ = pulse_eval(model.pulse, t)
    return -1j * c, s


# ----- experiment families --------------------------------------------------

def run_convergence(model: HubbardModel, methods, ks, t0: float, t1: float,
                    krylov_tol: float = KRYLOV_TOL_DEFAULT,
                    threads: int = 1):
    """Fixed-grid halving study: rows (method, tau, error, matvecs)."""
    psi0 = ground_state(model, t0)
    ref = reference_solution(model, t0, t1, psi0)
    cells = [(m, k) for m in methods for k in ks]

    def cell(arg):
        name, k = arg
        tau = 2.0 ** (-k)
        n_steps = int(round((t1 - t0) / tau))
        counter = MatvecCounter()
        traj = propagate_fixed(plain_stepper(name), model, t0, t1, n_steps,
                               psi0, krylov_tol=krylov_tol, counter=counter)
        err = float(np.linalg.norm(traj.psi_final - ref))
        GLOBAL_COUNTER.merge(counter)
        return name, tau, err, counter.count

    results = _run_cells(cell, cells, threads)
    return [results[c] for c in cells]


def run_workprec(model: HubbardModel, methods, tols, t0: float, t1: float,
                 krylov_tol: float = KRYLOV_TOL_DEFAULT, threads: int = 1):
    """Adaptive tolerance sweep: rows
    (method, tol, achieved_error, matvecs, steps_accepted, steps_rejected,
    quotient)."""
    psi0 = ground_state(model, t0)
    ref = reference_solution(model, t0, t1, psi0)
    cells = [(m, tol) for m in methods for tol in tols]

    def cell(arg):
        name, tol = arg
        info = method_info(name)
        counter = MatvecCounter()
        traj = propagate_adaptive(estimating_stepper(name), model, t0, t1,
                                  tol, psi0, order=info.order,
                                  krylov_tol=krylov_tol, counter=counter,
                                  record_observables=False)
        err = float(np.linalg.norm(traj.psi_final - ref))
        GLOBAL_COUNTER.merge(counter)
        return (name, tol, err, counter.count, traj.accepted_steps,
                traj.rejected_steps, err / tol)

    results = _run_cells(cell, cells, threads)
    return [results[c] for c in cells]


def run_trace(model: HubbardModel, method: str, tol: float, t0: float,
              t1: float, krylov_tol: float = KRYLOV_TOL_DEFAULT) -> Trajectory:
    """Adaptive run with per-step observable records."""
    info = method_info(method)
    psi0 = ground_state(model, t0)
    counter = MatvecCounter()
    traj = propagate_adaptive(estimating_stepper(method), model, t0, t1, tol,
                              psi0, order=info.order, krylov_tol=krylov_tol,
                              counter=counter, record_observables=True)
    GLOBAL_COUNTER.merge(counter)
    return traj


def _run_cells(cell_fn, cells, threads):
    if threads <= 1:
        return {c: cell_fn(c) for c in cells}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        out = list(pool.map(cell_fn, cells))
    return dict(zip(cells, out))


# ----- CSV contract ---------------------------------------------------------

def format_float(x) -> str:
    if isinstance(x, float) and (np.isnan(x)):
        return "nan"
    return repr(float(x))


def write_csv(path, command: str, meta: dict, header, rows) -> None:
    """One experiment family per file; '#'-metadata, then header, then rows.

    Output is deterministic for a fixed spec: floats use shortest-repr
    formatting and no timestamps are embedded.
    """
    buf = io.StringIO()
    buf.write(f"# command: {command}\n")
    buf.write(f"# code_version: {CODE_VERSION}\n")
    for key in meta:
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        cells = [c if isinstance(c, str)
                 else (str(c) if isinstance(c, (int, np.integer))
                       else format_float(c))
                 for c in row]
        buf.write(",".join(cells) + "\n")
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())


def model_meta(model: HubbardModel) -> dict:
    g, p = model.geometry, model.pulse
    return {
        "geometry": f"{g.rows}x{g.cols}",
        "n_up": model.basis.n_up,
        "n_down": model.basis.n_down,
        "n": model.n,
        "U": format_float(model.u),
        "on_site": ";".join(format_float(v) for v in g.on_site),
        "hop_magnitude": format_float(g.hop_magnitude),
        "pulse_a": format_float(p.a),
        "pulse_omega": format_float(p.omega),
        "pulse_sigma_p": format_float(p.sigma_p),
        "pulse_t_p": format_float(p.t_p),
        "controller": "safety=0.9,grow_max=4.0,shrink_min=0.25",
    }
