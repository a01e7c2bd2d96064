"""Shared fixtures: small lattice models and independent dense oracles.

The oracle Hamiltonians are built from scratch with Jordan-Wigner chains
over the full Fock space (modes 0..n-1 spin up, n..2n-1 spin down) and then
restricted to the fixed-filling sector, so signs and matrix elements come
from a construction the package does not share.
"""
from __future__ import annotations

import cmath
import math
from itertools import combinations

import numpy as np
import pytest

from hubmag.model import Geometry, PulseParams, build_model
from hubmag.basis import enumerate_basis

DIMER_ONSITE = (-1.0, -0.5)
SQUARE_ONSITE = (-1.75, -2.25, -2.25, -1.75)
LADDER_ONSITE = (-1.75, -2.25, -2.25, -1.75, -1.75, -2.25, -2.25, -1.75)
PULSE = PulseParams(a=0.2, omega=3.5, sigma_p=2.0, t_p=6.0)


# ----- package models -------------------------------------------------------

@pytest.fixture(scope="session")
def dimer_model():
    geom = Geometry(1, 2, DIMER_ONSITE)
    return build_model(geom, enumerate_basis(2, 1, 1), 4.0, PULSE)


@pytest.fixture(scope="session")
def square_model():
    geom = Geometry(2, 2, SQUARE_ONSITE)
    return build_model(geom, enumerate_basis(4, 2, 2), 4.0, PULSE)


@pytest.fixture(scope="session")
def ladder_model():
    geom = Geometry(2, 4, LADDER_ONSITE)
    return build_model(geom, enumerate_basis(8, 4, 4), 4.0, PULSE)


# ----- independent oracle construction --------------------------------------

def jw_annihilators(n_modes: int) -> list[np.ndarray]:
    """Fermionic annihilation matrices on the 2^n_modes Fock space."""
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for i in range(n_modes):
        m = np.ones((1, 1))
        for slot in range(n_modes):
            m = np.kron(m, z if slot < i else (a if slot == i else eye))
        ops.append(m)
    return ops


def fock_index(up: int, down: int, n_sites: int) -> int:
    """Fock-space index of the mask pair under the mode convention above.

    Kron slot ``i`` is the most significant for mode ``i = 0``, so mode ``i``
    contributes ``2**(n_modes - 1 - i)``.
    """
    n_modes = 2 * n_sites
    idx = 0
    for site in range(n_sites):
        if (up >> site) & 1:
            idx += 1 << (n_modes - 1 - site)
        if (down >> site) & 1:
            idx += 1 << (n_modes - 1 - (n_sites + site))
    return idx


def sector_masks(n_sites: int, count: int) -> list[int]:
    out = []
    for occ in combinations(range(n_sites), count):
        m = 0
        for i in occ:
            m |= 1 << i
        out.append(m)
    return sorted(out)


class DenseOracle:
    """Dense sector Hamiltonian pieces built via Jordan-Wigner matrices.

    ``h(t)`` returns the full Hamiltonian at time ``t``; ``hop_forward`` and
    ``hop_backward`` are the two directed hopping sums so that
    ``h = diag + f * forward + conj(f) * backward``.
    """

    def __init__(self, rows, cols, on_site, u, n_up, n_down, pulse,
                 hop=1.0):
        n_sites = rows * cols
        self.pulse = pulse
        ann = jw_annihilators(2 * n_sites)
        cre = [m.T for m in ann]
        bonds = []
        for r in range(rows):
            for c in range(cols):
                s = r * cols + c
                if c + 1 < cols:
                    bonds.append((s, s + 1))
                if r + 1 < rows:
                    bonds.append((s, s + cols))
        dim = 1 << (2 * n_sites)
        fwd = np.zeros((dim, dim))
        for (i, j) in bonds:
            for spin_off in (0, n_sites):
                fwd += hop * cre[j + spin_off] @ ann[i + spin_off]
        diag = np.zeros((dim, dim))
        for i in range(n_sites):
            n_up_i = cre[i] @ ann[i]
            n_dn_i = cre[i + n_sites] @ ann[i + n_sites]
            diag += on_site[i] * (n_up_i + n_dn_i) + u * (n_up_i @ n_dn_i)
        sel = [fock_index(up, dn, n_sites)
               for up in sector_masks(n_sites, n_up)
               for dn in sector_masks(n_sites, n_down)]
        self.hop_forward = fwd[np.ix_(sel, sel)]
        self.hop_backward = self.hop_forward.T
        self.diag = diag[np.ix_(sel, sel)]
        self.n = len(sel)

    def h(self, t: float) -> np.ndarray:
        f = oracle_pulse(self.pulse, t)
        return (self.diag + f * self.hop_forward
                + np.conj(f) * self.hop_backward)


def oracle_pulse(p: PulseParams, t: float) -> complex:
    """Unit-modulus phase factor, written out independently."""
    envelope = math.exp(-((t - p.t_p) ** 2) / (2.0 * p.sigma_p ** 2))
    angle = p.a * (math.cos(p.omega * (t - p.t_p))
                   - math.cos(p.omega * p.t_p)) * envelope
    return cmath.exp(1j * angle)


@pytest.fixture(scope="session")
def dimer_oracle():
    return DenseOracle(1, 2, DIMER_ONSITE, 4.0, 1, 1, PULSE)


@pytest.fixture(scope="session")
def square_oracle():
    return DenseOracle(2, 2, SQUARE_ONSITE, 4.0, 2, 2, PULSE)


# ----- dense helpers --------------------------------------------------------

def model_dense_h(model, t: float) -> np.ndarray:
    """Dense matrix of the package model's ``H(t)`` (assembled from its
    own sparse pieces; pair with the oracle for independence)."""
    n = model.n
    out = np.zeros((n, n), dtype=np.complex128)
    eye = np.eye(n, dtype=np.complex128)
    for k in range(n):
        out[:, k] = model.apply_h(t, eye[:, k])
    return out


def dense_propagate(h_of_t, psi0: np.ndarray, t0: float, t1: float,
                    rtol: float = 1e-13) -> np.ndarray:
    """Reference propagation of ``psi' = -i H(t) psi`` with a dense RHS."""
    from scipy.integrate import solve_ivp

    n = len(psi0)

    def rhs(t, y):
        d = -1j * (h_of_t(t) @ (y[:n] + 1j * y[n:]))
        return np.concatenate([d.real, d.imag])

    y0 = np.concatenate([psi0.real, psi0.imag])
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=rtol, atol=rtol)
    assert sol.success
    y = sol.y[:, -1]
    return y[:n] + 1j * y[n:]


def fit_order(taus, errors, lo: float = 5e-12, hi: float = 1e-2) -> float:
    """Median pairwise log2 slope over error pairs inside the trusted band.

    Filtering keeps the fit away from the reference floor and from
    preasymptotic blowup; the median resists single-pair outliers.
    """
    taus = np.asarray(taus, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = (errors >= lo) & (errors <= hi)
    taus, errors = taus[keep], errors[keep]
    slopes = []
    for i in range(len(taus)):
        for j in range(i + 1, len(taus)):
            if taus[i] != taus[j] and errors[i] > 0 and errors[j] > 0:
                slopes.append(np.log(errors[i] / errors[j])
                              / np.log(taus[i] / taus[j]))
    assert slopes, "no usable pairs for the order fit"
    return float(np.median(slopes))


def ground_state_dense(h0: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h0)
    psi = v[:, 0].astype(np.complex128)
    return psi / np.linalg.norm(psi)
