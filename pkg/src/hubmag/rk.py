"""Embedded Dormand-Prince 5(4) baseline for the comparison experiments.

One right-hand-side evaluation of ``psi' = -i H(t) psi`` costs one diagonal
and two large products. The seventh stage equals the first stage of the
next step (FSAL), so an accepted-step chain pays six evaluations per step;
reused stages are counted once.
"""
from __future__ import annotations

import numpy as np

from .cfm import StepEstimate
from .model import HubbardModel, pulse_eval
from .sparse import MatvecCounter, resolve_counter

DP_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
DP_B5 = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                  -2187.0 / 6784.0, 11.0 / 84.0, 0.0])
DP_B4 = np.array([5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
                  -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0])


def dopri45_step(model: HubbardModel, t0: float, tau: float, psi: np.ndarray,
                 *, counter: MatvecCounter | None = None,
                 carry: dict | None = None) -> StepEstimate:
    """One embedded step; ``err_est`` is the 5th-vs-4th order difference.

    ``carry`` is an optional FSAL cache: pass the same dict across calls of
    one trajectory and the final stage of an accepted step (or the first
    stage of a rejected one) is reused instead of recomputed.
    """
    counter = resolve_counter(counter)
    c_start = counter.count
    k1 = None
    if carry is not None:
        for slot in ("tail", "head"):
            hit = carry.get(slot)
            if hit is not None and hit[0] == t0 and hit[1] is psi:
                k1 = hit[2]
                break
    if k1 is None:
        k1 = model.apply_linear(-1j, *_cs_weights(model, t0), psi, counter)
    ks = [k1]
    for i in range(1, 7):
        y = psi + tau * sum(a * ks[j] for j, a in enumerate(DP_A[i]) if a)
        ks.append(model.apply_linear(-1j, *_cs_weights(model, t0 + DP_C[i] * tau),
                                     y, counter))
    y5 = psi + tau * sum(b * ks[j] for j, b in enumerate(DP_B5) if b)
    y4 = psi + tau * sum(b * ks[j] for j, b in enumerate(DP_B4) if b)
    err = float(np.linalg.norm(y5 - y4))
    if carry is not None:
        carry["head"] = (t0, psi, k1)
        carry["tail"] = (t0 + tau, y5, ks[6])
    return StepEstimate(y5, err, counter.count - c_start, 0)


def _cs_weights(model, t):
    _, c, s, _, _ = pulse_eval(model.pulse, t)
    return -1j * c, s
