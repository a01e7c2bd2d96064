"""Command-line driver: build model caches and run the experiment families.

Every option can also be set through an environment variable with prefix
``HUBMAG_`` (for example ``HUBMAG_CONVERGENCE_THREADS=4``).
"""
from __future__ import annotations

import sys

import click
import numpy as np

from . import experiments
from .basis import enumerate_basis
from .model import (Geometry, PulseParams, build_model, export_matrix_market,
                    extremal_eigenvalues, load_model, save_model)
from .stepping import TrajectorySample

_LARGE_DIM = 200_000

_PRESETS = {
    # geometry -> (U, on_site, pulse)
    "2x4": (4.0, (-1.75, -2.25, -2.25, -1.75, -1.75, -2.25, -2.25, -1.75),
            PulseParams(a=0.2, omega=3.5, sigma_p=2.0, t_p=6.0)),
    "4x3": (8.0, (-4.0,) * 12,
            PulseParams(a=0.8, omega=11.0, sigma_p=2.0, t_p=7.5)),
}


def _parse_geometry(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise click.BadParameter(f"expected RxC, got {text!r}")
    if rows < 1 or cols < 1:
        raise click.BadParameter("lattice dimensions must be positive")
    return rows, cols


def _parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p]


def _parse_k_range(text: str) -> list[int]:
    """``0..5`` or ``0,1,2``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in text.split(",") if p]


def _parse_tols(text: str) -> list[float]:
    """``1e-4..1e-10`` (decade steps, inclusive) or a comma list."""
    if ".." in text:
        lo, hi = (float(p) for p in text.split(".."))
        e0, e1 = int(round(np.log10(lo))), int(round(np.log10(hi)))
        step = 1 if e1 >= e0 else -1
        return [10.0 ** e for e in range(e0, e1 + step, step)]
    return _parse_float_list(text)


def _gate_large(n: int, large: bool) -> None:
    if n > _LARGE_DIM and not large:
        raise click.UsageError(
            f"state space dimension {n} needs several GB of memory; "
            "pass --large to confirm")


@click.group(context_settings={"auto_envvar_prefix": "HUBMAG"})
def main():
    """Exact propagation of driven Hubbard models."""


@main.command()
@click.option("--geometry", default="2x4", show_default=True,
              help="Lattice as RxC; 2x4 and 4x3 carry parameter presets.")
@click.option("--u", "--U", "u", type=float, default=None,
              help="On-site interaction strength.")
@click.option("--on-site", default=None,
              help="Comma list of per-site energies (row-major).")
@click.option("--hop", type=float, default=1.0, show_default=True,
              help="Nearest-neighbor hopping magnitude.")
@click.option("--n-up", type=int, default=None,
              help="Spin-up electron count [default: half filling].")
@click.option("--n-down", type=int, default=None,
              help="Spin-down electron count [default: half filling].")
@click.option("--a", type=float, default=None, help="Pulse amplitude.")
@click.option("--omega", type=float, default=None, help="Pulse frequency.")
@click.option("--sigma-p", type=float, default=None, help="Pulse width.")
@click.option("--t-p", type=float, default=None, help="Pulse center.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Model cache file to write.")
@click.option("--large", is_flag=True,
              help="Allow state spaces above 200000 (several GB).")
@click.option("--matrix-market", type=click.Path(dir_okay=False), default=None,
              help="Also export H(t) in Matrix Market format.")
@click.option("--mm-t", type=float, default=0.0, show_default=True,
              help="Time at which --matrix-market samples H(t).")
def build(geometry, u, on_site, hop, n_up, n_down, a, omega, sigma_p, t_p,
          out, large, matrix_market, mm_t):
    """Assemble a model and write its binary cache."""
    rows, cols = _parse_geometry(geometry)
    n_sites = rows * cols
    preset = _PRESETS.get(f"{rows}x{cols}")
    if preset is None and None in (u, a, omega, sigma_p, t_p):
        raise click.UsageError(
            f"geometry {rows}x{cols} has no preset; give --u, --a, --omega, "
            "--sigma-p and --t-p explicitly")
    p_u, p_onsite, p_pulse = preset if preset else (None, (0.0,) * n_sites, None)
    u = p_u if u is None else u
    sites = tuple(_parse_float_list(on_site)) if on_site else p_onsite
    if len(sites) != n_sites:
        raise click.BadParameter(
            f"--on-site lists {len(sites)} energies for {n_sites} sites")
    pulse = PulseParams(
        a=p_pulse.a if a is None else a,
        omega=p_pulse.omega if omega is None else omega,
        sigma_p=p_pulse.sigma_p if sigma_p is None else sigma_p,
        t_p=p_pulse.t_p if t_p is None else t_p)
    n_up = n_sites // 2 if n_up is None else n_up
    n_down = n_sites // 2 if n_down is None else n_down

    basis = enumerate_basis(n_sites, n_up, n_down)
    _gate_large(basis.n, large)
    geom = Geometry(rows, cols, sites, hop)
    model = build_model(geom, basis, u, pulse)
    save_model(model, out)
    lam_min, lam_max = extremal_eigenvalues(model, 0.0)
    click.echo(f"n = {model.n}")
    click.echo(f"nnz = {model.nnz} (structural {model.nnz_structural})")
    click.echo(f"extremal eigenvalues at t=0: [{lam_min:.6f}, {lam_max:.6f}]")
    click.echo(f"wrote {out}")
    if matrix_market:
        export_matrix_market(model, mm_t, matrix_market)
        click.echo(f"wrote {matrix_market}")


def _load(path, large):
    model = load_model(path)
    _gate_large(model.n, large)
    return model


_COMMON = [
    click.option("--model", "model_path", required=True,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Model cache from `build`."),
    click.option("--t0", type=float, default=0.0, show_default=True),
    click.option("--t1", type=float, default=20.0, show_default=True),
    click.option("--krylov-tol", type=float,
                 default=experiments.KRYLOV_TOL_DEFAULT, show_default=True),
    click.option("--out", type=click.Path(dir_okay=False), required=True,
                 help="CSV output path."),
    click.option("--large", is_flag=True,
                 help="Allow state spaces above 200000 (several GB)."),
]


def _common(fn):
    for opt in reversed(_COMMON):
        fn = opt(fn)
    return fn


def _validate_methods(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    for m in names:
        try:
            experiments.method_info(m)
        except KeyError as exc:
            raise click.BadParameter(exc.args[0])
    return names


@main.command()
@_common
@click.option("--methods", default="cf2,cf4,cf4o,cf4oh,cf6n,cf7,magnus4,"
              "magnusstrang4", show_default=True,
              help="Comma list of integrators.")
@click.option("--k", "k_range", default="0..5", show_default=True,
              help="Step-size exponents: tau = 2^-k.")
@click.option("--threads", type=int, default=1, show_default=True)
def convergence(model_path, t0, t1, krylov_tol, out, large, methods, k_range,
                threads):
    """Fixed-grid convergence study with halved step sizes."""
    model = _load(model_path, large)
    names = _validate_methods(methods)
    ks = _parse_k_range(k_range)
    rows = experiments.run_convergence(model, names, ks, t0, t1,
                                       krylov_tol=krylov_tol, threads=threads)
    cmd = (f"convergence --model {model_path} --methods {','.join(names)} "
           f"--k {k_range} --t0 {t0!r} --t1 {t1!r} "
           f"--krylov-tol {krylov_tol!r}")
    meta = experiments.model_meta(model)
    meta["krylov_tol"] = experiments.format_float(krylov_tol)
    meta["t0"], meta["t1"] = experiments.format_float(t0), experiments.format_float(t1)
    experiments.write_csv(out, cmd, meta, experiments.CONVERGENCE_COLUMNS, rows)
    click.echo(f"wrote {out} ({len(rows)} rows)")


@main.command()
@_common
@click.option("--methods", default="cf2,cf4,cf4o,cf4oh,cf6n,cf7,magnus4,"
              "magnusstrang4,dopri45", show_default=True)
@click.option("--tols", default="1e-4..1e-10", show_default=True,
              help="Tolerance sweep: decades lo..hi or a comma list.")
@click.option("--threads", type=int, default=1, show_default=True)
def workprec(model_path, t0, t1, krylov_tol, out, large, methods, tols,
             threads):
    """Adaptive work-precision sweep over tolerances."""
    model = _load(model_path, large)
    names = _validate_methods(methods)
    tol_list = _parse_tols(tols)
    rows = experiments.run_workprec(model, names, tol_list, t0, t1,
                                    krylov_tol=krylov_tol, threads=threads)
    cmd = (f"workprec --model {model_path} --methods {','.join(names)} "
           f"--tols {tols} --t0 {t0!r} --t1 {t1!r} "
           f"--krylov-tol {krylov_tol!r}")
    meta = experiments.model_meta(model)
    meta["krylov_tol"] = experiments.format_float(krylov_tol)
    meta["t0"], meta["t1"] = experiments.format_float(t0), experiments.format_float(t1)
    experiments.write_csv(out, cmd, meta, experiments.WORKPREC_COLUMNS, rows)
    click.echo(f"wrote {out} ({len(rows)} rows)")


@main.command()
@_common
@click.option("--method", default="cf4oh", show_default=True)
@click.option("--tol", type=float, default=1e-11, show_default=True)
def trace(model_path, t0, t1, krylov_tol, out, large, method, tol):
    """Adaptive run recording per-step observables."""
    model = _load(model_path, large)
    _validate_methods(method)
    traj = experiments.run_trace(model, method, tol, t0, t1,
                                 krylov_tol=krylov_tol)
    cmd = (f"trace --model {model_path} --method {method} --tol {tol!r} "
           f"--t0 {t0!r} --t1 {t1!r} --krylov-tol {krylov_tol!r}")
    meta = experiments.model_meta(model)
    meta["method"] = method
    meta["tol"] = experiments.format_float(tol)
    meta["krylov_tol"] = experiments.format_float(krylov_tol)
    meta["t0"], meta["t1"] = experiments.format_float(t0), experiments.format_float(t1)
    rows = [_trace_row(s) for s in traj.samples]
    experiments.write_csv(out, cmd, meta, experiments.TRACE_COLUMNS, rows)
    click.echo(f"wrote {out} ({traj.accepted_steps} accepted, "
               f"{traj.rejected_steps} rejected steps)")


def _trace_row(s: TrajectorySample):
    return (s.t, s.tau, s.norm, s.energy, s.double_occ, s.err_est,
            s.matvecs_cum, s.krylov_m)


if __name__ == "__main__":
    main(prog_name="hubmag")
