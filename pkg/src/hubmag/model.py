"""Driven Hubbard Hamiltonian on a rectangular open lattice.

The Hamiltonian splits as ``H(t) = diag(h_diag) + c(t) h_symm + i s(t) h_anti``
where ``c + i s = f(t)`` is the unit-modulus Peierls phase common to all
bonds (field along the lattice diagonal; forward hops in the +x and +y
directions carry ``f(t)``, reverse hops its conjugate). ``h_symm`` is real
symmetric, ``h_anti`` real skew-symmetric, and both share one sparsity
pattern, so every time-dependent operator used by the integrators is a
weighted combination over that pattern plus a diagonal.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import Basis, apply_hop, enumerate_basis
from .sparse import (MatvecCounter, SparseRealMatrix, _fused_kernel,
                     _pair_kernel, resolve_counter, spmv)

_MAGIC = b"HUBM"
_VERSION = 1


@dataclass(frozen=True)
class Geometry:
    """Rectangular lattice with open boundaries and lexicographic sites.

    ``on_site[i]`` is the per-site energy of site ``i = r * cols + c``;
    ``hop_magnitude`` the common nearest-neighbor amplitude.
    """

    rows: int
    cols: int
    on_site: tuple
    hop_magnitude: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("lattice dimensions must be positive")
        if len(self.on_site) != self.rows * self.cols:
            raise ValueError("on_site must list one energy per site")
        if self.boundary != "open":
            raise ValueError("only open boundaries are supported")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def bonds(self):
        """Forward nearest-neighbor bonds ``(i, j)``: right then down."""
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                s = r * self.cols + c
                if c + 1 < self.cols:
                    out.append((s, s + 1))
                if r + 1 < self.rows:
                    out.append((s, s + self.cols))
        return out


@dataclass(frozen=True)
class PulseParams:
    """Parameters of the Peierls phase
    ``f(t) = exp(i a (cos(omega (t - t_p)) - b) exp(-(t - t_p)^2 / (2 sigma_p^2)))``
    with ``b = cos(omega t_p)`` so that ``f(0) = 1``.
    """

    a: float
    omega: float
    sigma_p: float
    t_p: float

    @property
    def b(self) -> float:
        return float(np.cos(self.omega * self.t_p))


def pulse_eval(p: PulseParams, t: float):
    """Evaluate the pulse phase and its exact derivatives at ``t``.

    Returns
    -------
    (f, c, s, dc, ds)
        ``f = exp(i g(t))`` with ``c = Re f``, ``s = Im f`` and their
        analytic time derivatives ``dc``, ``ds``.
    """
    dt = t - p.t_p
    env = np.exp(-dt * dt / (2.0 * p.sigma_p ** 2))
    g = p.a * (np.cos(p.omega * dt) - p.b) * env
    dg = p.a * ((-p.omega * np.sin(p.omega * dt)) * env
                + (np.cos(p.omega * dt) - p.b) * env * (-dt / p.sigma_p ** 2))
    c = np.cos(g)
    s = np.sin(g)
    return complex(c, s), float(c), float(s), float(-s * dg), float(c * dg)


def _species_hops(masks: np.ndarray, bonds, hop: float):
    """Single-species hopping matrices over ``masks``.

    Returns CSR matrices ``(S, T)`` on one pattern: ``S`` collects every hop
    with amplitude ``hop``, ``T`` flips the sign of reverse (against-field)
    hops, so that ``c S + i s T`` carries ``hop * f(t)`` forward and its
    conjugate backward.
    """
    index = {int(m): k for k, m in enumerate(masks)}
    rows, cols, v_s, v_t = [], [], [], []
    for (i, j) in bonds:
        for k, m in enumerate(masks):
            m = int(m)
            fwd = apply_hop(m, i, j)
            if fwd is not None:
                m2, sgn = fwd
                rows.append(index[m2]); cols.append(k)
                v_s.append(hop * sgn); v_t.append(hop * sgn)
            rev = apply_hop(m, j, i)
            if rev is not None:
                m2, sgn = rev
                rows.append(index[m2]); cols.append(k)
                v_s.append(hop * sgn); v_t.append(-hop * sgn)
    n = len(masks)
    s_mat = sp.coo_matrix((v_s, (rows, cols)), shape=(n, n)).tocsr()
    t_mat = sp.coo_matrix((v_t, (rows, cols)), shape=(n, n)).tocsr()
    s_mat.sort_indices()
    t_mat.sort_indices()
    return s_mat, t_mat


@dataclass
class HubbardModel:
    """Assembled model: diagonal, symmetric and antisymmetric parts plus pulse."""

    basis: Basis
    geometry: Geometry
    u: float
    h_diag: np.ndarray
    h_symm: SparseRealMatrix
    h_anti: SparseRealMatrix
    pulse: PulseParams
    _gershgorin: float | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.h_diag)

    @property
    def nnz(self) -> int:
        """Nonzero entries of ``H(t)`` at generic ``t``: off-diagonal pattern
        plus diagonal entries that are actually nonzero."""
        return self.h_symm.nnz + int(np.count_nonzero(self.h_diag))

    @property
    def nnz_structural(self) -> int:
        """Off-diagonal pattern plus every diagonal slot, zero or not."""
        return self.h_symm.nnz + self.n

    # ----- operator applications -------------------------------------------

    def apply_linear(self, wd: complex, ws: complex, wa: complex, x: np.ndarray,
                     counter: MatvecCounter | None = None) -> np.ndarray:
        """``(wd diag(h_diag) + ws h_symm + wa h_anti) x`` in one pattern walk.

        Counts one product per constituent with a nonzero weight.
        """
        x = np.ascontiguousarray(x, dtype=np.complex128)
        out = np.empty(self.n, dtype=np.complex128)
        cnt = resolve_counter(counter)
        wd = complex(wd); ws = complex(ws); wa = complex(wa)
        if wd != 0 and (ws != 0 or wa != 0):
            _fused_kernel(self.h_symm.row_ptr, self.h_symm.col_idx,
                          self.h_symm.values, self.h_anti.values,
                          self.h_diag, wd, ws, wa, x, out)
            cnt.add(1 + (ws != 0) + (wa != 0))
        elif ws != 0 or wa != 0:
            _pair_kernel(self.h_symm.row_ptr, self.h_symm.col_idx,
                         self.h_symm.values, self.h_anti.values,
                         ws, wa, x, out)
            cnt.add((ws != 0) + (wa != 0))
        else:
            np.multiply(self.h_diag, x, out=out)
            out *= wd
            cnt.add(1)
        return out

    def apply_h(self, t: float, x: np.ndarray,
                counter: MatvecCounter | None = None) -> np.ndarray:
        """``H(t) x``; three constituent products."""
        _, c, s, _, _ = pulse_eval(self.pulse, t)
        return self.apply_linear(1.0, c, 1j * s, x, counter)

    def apply_symm(self, x, scale: complex = 1.0, counter=None):
        return spmv(self.h_symm, x, scale, counter)

    def apply_anti(self, x, scale: complex = 1.0, counter=None):
        return spmv(self.h_anti, x, scale, counter)

    def apply_diag(self, x, scale: complex = 1.0, counter=None):
        out = np.multiply(self.h_diag, np.ascontiguousarray(x, dtype=np.complex128))
        if scale != 1.0:
            out *= scale
        resolve_counter(counter).add(1)
        return out

    def gershgorin_bound(self) -> float:
        """Upper bound on the spectral radius of ``H(t)``, any ``t``."""
        if self._gershgorin is None:
            absrow = np.zeros(self.n)
            np.add.at(absrow, np.repeat(np.arange(self.n),
                                        np.diff(self.h_symm.row_ptr)),
                      np.abs(self.h_symm.values) + np.abs(self.h_anti.values))
            self._gershgorin = float(np.max(np.abs(self.h_diag) + absrow))
        return self._gershgorin


def build_model(geom: Geometry, basis: Basis, u: float,
                pulse: PulseParams) -> HubbardModel:
    """Assemble the three constant matrices for ``geom`` over ``basis``.

    Each unordered bond contributes its amplitude once plus Hermitian
    conjugate; on-site energies count once per electron; ``u`` once per
    doubly occupied site.
    """
    if basis.n_sites != geom.n_sites:
        raise ValueError(
            f"basis has {basis.n_sites} sites, geometry {geom.n_sites}")
    bonds = geom.bonds()
    su, tu = _species_hops(basis.up_masks, bonds, geom.hop_magnitude)
    if basis.n_up == basis.n_down:
        sd, td = su, tu
    else:
        sd, td = _species_hops(basis.down_masks, bonds, geom.hop_magnitude)
    nu, nd = basis.n_up_states, basis.n_down_states
    h_s = (sp.kron(su, sp.identity(nd, format="csr"), format="csr")
           + sp.kron(sp.identity(nu, format="csr"), sd, format="csr"))
    h_a = (sp.kron(tu, sp.identity(nd, format="csr"), format="csr")
           + sp.kron(sp.identity(nu, format="csr"), td, format="csr"))
    h_s.sort_indices()
    h_a.sort_indices()
    if not (np.array_equal(h_s.indptr, h_a.indptr)
            and np.array_equal(h_s.indices, h_a.indices)):
        raise AssertionError("hopping matrices lost their shared pattern")

    row_ptr = h_s.indptr.astype(np.int64)
    col_idx = h_s.indices.astype(np.int64)
    symm = SparseRealMatrix(basis.n, row_ptr, col_idx,
                            h_s.data.astype(np.float64))
    anti = SparseRealMatrix(basis.n, row_ptr, col_idx,
                            h_a.data.astype(np.float64))

    on_site = np.asarray(geom.on_site, dtype=np.float64)
    occ_up = _occupancies(basis.up_masks, geom.n_sites)
    occ_dn = (occ_up if basis.n_up == basis.n_down
              else _occupancies(basis.down_masks, geom.n_sites))
    e_up = occ_up @ on_site
    e_dn = occ_dn @ on_site
    h_diag = (e_up[:, None] + e_dn[None, :]).ravel()
    h_diag += u * basis.doublon_counts()

    return HubbardModel(basis, geom, float(u), h_diag, symm, anti, pulse)


def _occupancies(masks: np.ndarray, n_sites: int) -> np.ndarray:
    bits = np.arange(n_sites, dtype=np.uint64)
    return ((masks[:, None] >> bits[None, :]) & np.uint64(1)).astype(np.float64)


def extremal_eigenvalues(model: HubbardModel, t: float,
                         tol: float = 1e-6) -> tuple[float, float]:
    """Extremal eigenvalues of the Hermitian ``H(t)`` via Lanczos."""
    from .krylov import HermitianOperator, lanczos_extremal

    _, c, s, _, _ = pulse_eval(model.pulse, t)
    op = HermitianOperator(
        apply=lambda v: model.apply_linear(1.0, c, 1j * s, v),
        dim=model.n, norm_hint=model.gershgorin_bound())
    lam_min, lam_max, _ = lanczos_extremal(op, tol=tol)
    return lam_min, lam_max


def observable_energy(model: HubbardModel, t: float, psi: np.ndarray) -> float:
    """``Re <psi | H(t) | psi>`` for a normalized state.

    The product is not charged to any counter: observable evaluation is
    bookkeeping, not propagation work.
    """
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"state norm {nrm} deviates from 1 beyond 1e-8")
    scratch = MatvecCounter()
    q = np.vdot(psi, model.apply_h(t, psi, scratch))
    if abs(q.imag) >= 1e-10 * max(1.0, abs(q.real)):
        raise ValueError(f"quadratic form has imaginary part {q.imag}")
    return float(q.real)


def observable_double_occupation(basis: Basis, psi: np.ndarray) -> float:
    """Mean double occupation ``(1/N) sum_i <n_i_up n_i_down>``."""
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"state norm {nrm} deviates from 1 beyond 1e-8")
    weights = np.abs(psi) ** 2
    return float(weights @ basis.doublon_counts()) / basis.n_sites


# ----- persistence ----------------------------------------------------------

def save_model(model: HubbardModel, path) -> None:
    """Write the binary cache: magic, version, header, h_diag, h_symm, h_anti."""
    g, p = model.geometry, model.pulse
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<4I", g.rows, g.cols,
                            model.basis.n_up, model.basis.n_down))
        f.write(struct.pack("<6d", model.u, p.a, p.omega, p.sigma_p, p.t_p,
                            g.hop_magnitude))
        np.asarray(g.on_site, dtype="<f8").tofile(f)
        model.h_diag.astype("<f8").tofile(f)
        for m in (model.h_symm, model.h_anti):
            f.write(struct.pack("<QQ", m.n, m.nnz))
            m.row_ptr.astype("<u8").tofile(f)
            m.col_idx.astype("<u8").tofile(f)
            m.values.astype("<f8").tofile(f)


def load_model(path) -> HubbardModel:
    """Read a model cache written by :func:`save_model`."""
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a model cache")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        rows, cols, n_up, n_down = struct.unpack("<4I", f.read(16))
        u, a, omega, sigma_p, t_p, hop = struct.unpack("<6d", f.read(48))
        on_site = np.fromfile(f, dtype="<f8", count=rows * cols)
        basis = enumerate_basis(rows * cols, n_up, n_down)
        h_diag = np.fromfile(f, dtype="<f8", count=basis.n)
        mats = []
        for _ in range(2):
            n, nnz = struct.unpack("<QQ", f.read(16))
            if n != basis.n:
                raise ValueError(f"{path}: dimension mismatch in matrix block")
            row_ptr = np.fromfile(f, dtype="<u8", count=n + 1).astype(np.int64)
            col_idx = np.fromfile(f, dtype="<u8", count=nnz).astype(np.int64)
            values = np.fromfile(f, dtype="<f8", count=nnz)
            mats.append(SparseRealMatrix(int(n), row_ptr, col_idx, values))
    symm, anti = mats
    if (np.array_equal(symm.row_ptr, anti.row_ptr)
            and np.array_equal(symm.col_idx, anti.col_idx)):
        anti.row_ptr = symm.row_ptr
        anti.col_idx = symm.col_idx
    else:
        raise ValueError(f"{path}: hopping matrices do not share a pattern")
    geometry = Geometry(rows, cols, tuple(float(v) for v in on_site), hop)
    pulse = PulseParams(a, omega, sigma_p, t_p)
    return HubbardModel(basis, geometry, u, h_diag, symm, anti, pulse)


def export_matrix_market(model: HubbardModel, t: float, path) -> None:
    """Write ``H(t)`` in Matrix Market coordinate format (complex general)."""
    _, c, s, _, _ = pulse_eval(model.pulse, t)
    n = model.n
    diag_nz = np.nonzero(model.h_diag)[0]
    total = model.h_symm.nnz + len(diag_nz)
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate complex general\n")
        f.write(f"% driven Hubbard H(t) at t={t!r}\n")
        f.write(f"{n} {n} {total}\n")
        for i in diag_nz:
            f.write(f"{i + 1} {i + 1} {float(model.h_diag[i])!r} 0.0\n")
        rp, ci = model.h_symm.row_ptr, model.h_symm.col_idx
        vs, va = model.h_symm.values, model.h_anti.values
        for i in range(n):
            for p in range(rp[i], rp[i + 1]):
                re = float(c * vs[p])
                im = float(s * va[p])
                f.write(f"{i + 1} {ci[p] + 1} {re!r} {im!r}\n")
