"""Adaptive and fixed-step propagation loops with trajectory recording.

A stepper is any callable ``(model, t0, tau, psi, krylov_tol, counter) ->
StepEstimate``. The controller accepts a step when the estimate is below
the tolerance and rescales the step size with the usual order-(p+1) rule.
Observable evaluation along the trajectory uses a scratch counter so that
recorded work reflects propagation only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .cfm import StepEstimate
from .model import (HubbardModel, observable_double_occupation,
                    observable_energy)
from .sparse import MatvecCounter

Stepper = Callable[..., StepEstimate]


@dataclass
class StepController:
    """Order-(p+1) local error controller with clamped resizing."""

    tol: float
    order: int
    safety: float = 0.9
    grow_max: float = 4.0
    shrink_min: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.shrink_min < 1.0 < self.grow_max):
            raise ValueError("need 0 < shrink_min < 1 < grow_max")
        if not (0.0 < self.safety <= 1.0):
            raise ValueError("safety must lie in (0, 1]")


class TrajectorySample(NamedTuple):
    t: float
    tau: float
    norm: float
    energy: float
    double_occ: float
    err_est: float
    matvecs_cum: int
    krylov_m: int


@dataclass
class Trajectory:
    """Accepted-step records plus the final state."""

    samples: list
    rejected_steps: int
    psi_final: np.ndarray

    @property
    def accepted_steps(self) -> int:
        return len(self.samples)

    @property
    def matvecs(self) -> int:
        return self.samples[-1].matvecs_cum if self.samples else 0


def propose(ctrl: StepController, tau: float, err_est: float):
    """Accept / reject a step and propose the next step size."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if err_est < 0.0:
        raise ValueError("err_est must be nonnegative")
    accept = err_est <= ctrl.tol
    factor = ctrl.safety * (ctrl.tol / max(err_est, 1e-300)) ** (
        1.0 / (ctrl.order + 1))
    factor = min(ctrl.grow_max, max(ctrl.shrink_min, factor))
    return accept, tau * factor


_MAX_ACCEPTED = 10 ** 6
_MAX_CONSECUTIVE_REJECTS = 20


def propagate_adaptive(stepper: Stepper, model: HubbardModel, t0: float,
                       t_end: float, tol: float, psi0: np.ndarray, *,
                       order: int, krylov_tol: float = 1e-12,
                       counter: MatvecCounter | None = None,
                       controller: StepController | None = None,
                       record_observables: bool = True) -> Trajectory:
    """Propagate with the defect-controlled adaptive loop.

    The first trial step is ``min(0.1, (t_end - t0) / 10)``; the last step
    is clipped to land exactly on ``t_end``. Rejected steps burn their
    matvecs into the counter like accepted ones.
    """
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    ctrl = controller or StepController(tol=tol, order=order)
    counter = counter if counter is not None else MatvecCounter()
    psi = np.ascontiguousarray(psi0, dtype=np.complex128)
    t = t0
    tau_next = min(0.1, (t_end - t0) / 10.0)
    samples: list[TrajectorySample] = []
    rejected = 0
    consecutive_rejects = 0
    carry: dict = {}
    span = t_end - t0
    while t < t_end - 1e-12 * span:
        tau = min(tau_next, t_end - t)
        est = stepper(model, t, tau, psi, krylov_tol, counter, carry)
        accept, tau_next = propose(ctrl, tau, est.err_est)
        if accept:
            psi = est.psi_next
            t = t0 + span if abs((t + tau) - t_end) <= 1e-12 * span else t + tau
            consecutive_rejects = 0
            samples.append(_sample(model, t, tau, psi, est, counter,
                                   record_observables))
            if len(samples) > _MAX_ACCEPTED:
                raise RuntimeError("adaptive propagation exceeded 1e6 steps")
        else:
            rejected += 1
            consecutive_rejects += 1
            if consecutive_rejects >= _MAX_CONSECUTIVE_REJECTS:
                raise RuntimeError(
                    f"{consecutive_rejects} consecutive rejected steps at t={t}")
    return Trajectory(samples, rejected, psi)


def propagate_fixed(stepper: Stepper, model: HubbardModel, t0: float,
                    t_end: float, n_steps: int, psi0: np.ndarray, *,
                    krylov_tol: float = 1e-12,
                    counter: MatvecCounter | None = None,
                    record_observables: bool = False) -> Trajectory:
    """Propagate on a uniform grid; no estimate is required of the stepper."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    counter = counter if counter is not None else MatvecCounter()
    psi = np.ascontiguousarray(psi0, dtype=np.complex128)
    tau = (t_end - t0) / n_steps
    samples: list[TrajectorySample] = []
    carry: dict = {}
    for i in range(n_steps):
        t_i = t0 + i * tau
        est = stepper(model, t_i, tau, psi, krylov_tol, counter, carry)
        psi = est.psi_next
        t_next = t_end if i == n_steps - 1 else t0 + (i + 1) * tau
        samples.append(_sample(model, t_next, tau, psi, est, counter,
                               record_observables))
    return Trajectory(samples, 0, psi)


def _sample(model, t, tau, psi, est: StepEstimate, counter,
            record_observables):
    nrm = float(np.linalg.norm(psi))
    if record_observables:
        unit = psi if abs(nrm - 1.0) < 1e-12 else psi / nrm
        energy = observable_energy(model, t, unit)
        docc = observable_double_occupation(model.basis, unit)
    else:
        energy = np.nan
        docc = np.nan
    return TrajectorySample(t, tau, nrm, energy, docc, est.err_est,
                            counter.count, est.krylov_m)
