"""Command-line entry point: ``woodpile <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 numeric error, 4 resource
error.  Flags override keys of the configuration document.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import LENGTH, PipelineConfig, parse_float_list
from .cqed import CavitySpec, EmitterSpec, cavity_metrics
from .errors import ConfigurationError, WoodpileError

NM = LENGTH["nm"]
C0 = 299_792_458.0


def _load(path) -> PipelineConfig:
    return config_mod.load(path) if path else config_mod.loads("", "<defaults>")


def _only(cfg: PipelineConfig, *sections) -> PipelineConfig:
    """Same values, with only ``sections`` requested as stages."""
    return PipelineConfig(cfg.sections, cfg.source, frozenset({"structure", "output", *sections}))


def _set_jobs(jobs):
    if jobs:
        import numba

        numba.set_num_threads(min(jobs, numba.config.NUMBA_NUM_THREADS))


def _print_files(bundle):
    for name in bundle.files:
        print(bundle.directory / name)


# --- subcommands ---------------------------------------------------------------------


def cmd_bands(args):
    from .pipeline import run_pipeline

    cfg = _load(args.config)
    if args.plane_waves:
        cfg.override("bands", "plane_waves", args.plane_waves)
    if args.path:
        cfg.override("bands", "path", args.path)
    if args.points:
        cfg.override("bands", "points_per_segment", args.points)
    out = run_pipeline(_only(cfg, "bands"), args.out, args.jobs)
    print(out.results["gap"].text(), end="")
    _print_files(out)


def cmd_sweep(args):
    from .pipeline import run_pipeline

    cfg = _load(args.config)
    if args.range:
        cfg.override("sweep", "w_over_c", parse_float_list(args.range, "--range"))
    if args.plane_waves:
        cfg.override("sweep", "plane_waves", args.plane_waves)
    if args.workers:
        cfg.override("sweep", "workers", args.workers)
    out = run_pipeline(_only(cfg, "sweep"), args.out, args.jobs)
    for v, r in out.results["sweep"]:
        print(f"w/c = {v:.4f}  gap/midgap = {r.ratio:.4f}")
    _print_files(out)


def cmd_resonate(args):
    from .pipeline import run_pipeline

    cfg = _load(args.config)
    if args.resolution:
        cfg.override("fdtd", "resolution", args.resolution)
    if args.steps:
        cfg.override("fdtd", "steps", args.steps)
    if args.boundary:
        cfg.override("fdtd", "boundary", args.boundary)
    if args.orientation:
        cfg.override("fdtd", "orientation", args.orientation)
    if args.probe:
        cfg.override("fdtd", "probe_offset", tuple(v * NM for v in args.probe))
    if args.cache:
        cfg.override("output", "cache", args.cache)
    cfg.override("fdtd", "snapshot", bool(args.snapshot))
    out = run_pipeline(_only(cfg, "fdtd"), args.out, args.jobs)
    spec_c = cfg["structure"]["period"]
    best = out.results["modes"][0]
    print(f"c/lambda0 = {best.reduced(spec_c):.5f}  lambda0 = {best.wavelength() / NM:.2f} nm  Q = {best.Q:.4g}")
    _print_files(out)


def cmd_fit(args):
    from .specfit import MODE_COLUMNS, RingdownSignal, harmonic_inversion, mode_row, read_signal_csv, write_modes_csv

    period = args.period * NM if args.period else None
    band = None
    if args.band:
        if period is None:
            raise ConfigurationError("--band is in c/lambda and needs --period")
        band = tuple(v * C0 / period for v in args.band)
    sig = read_signal_csv(args.probe, band=band)
    if args.start:
        sig = RingdownSignal(sig.samples[args.start:], sig.dt, band)
    modes = harmonic_inversion(sig, max_modes=args.max_modes, band=band)
    if args.out:
        write_modes_csv(args.out, modes, period)
    w = csv.writer(sys.stdout)
    w.writerow(MODE_COLUMNS)
    for mo in modes:
        w.writerow(mode_row(mo, period))


def cmd_modevol(args):
    from . import modevol

    snap = modevol.FieldSnapshot.read(args.snapshot)
    wavelength = args.wavelength * NM if args.wavelength else C0 / snap.frequency
    rep = modevol.report(snap, wavelength, args.n_def)
    rep["f_opt_Hz"] = snap.frequency
    text = json.dumps(rep, indent=2)
    if args.out:
        modevol.write_report(args.out, rep)
    print(text)
    for ax in args.linecut or ():
        axis = "xyz".index(ax)
        path = Path(args.linecut_prefix + f"_{ax}.csv")
        modevol.write_line_cut(path, snap, axis, period=args.period * NM if args.period else None)
        print(path)


def _emitter_from_args(args) -> EmitterSpec:
    if args.emitter.upper() in ("NV", "NV-ZPL"):
        return EmitterSpec.nv_centre()
    raise ConfigurationError(f"unknown emitter preset {args.emitter!r}")


def cmd_cqed(args):
    from .pipeline import emit_table, replay_metrics, write_metrics_csv

    emitter = _emitter_from_args(args)
    if args.what == "table":
        from .tables import load_rows

        for table in ("I", "II"):
            rows = [r for r in load_rows() if r.table == table]
            mets = [replay_metrics(r, emitter) for r in rows]
            print(f"Table {table}")
            print(emit_table(mets, [r.label for r in rows]))
        return
    if args.Q is None or args.wavelength is None or (args.V_eff is None) == (args.V_n is None):
        raise ConfigurationError("cqed needs --Q, --wavelength and exactly one of --V-eff / --V-n")
    lam = args.wavelength * NM
    if args.V_eff is not None:
        cav = CavitySpec(lam, args.Q, args.V_eff * 1e-18, args.n_def)
    else:
        cav = CavitySpec.from_normalized(lam, args.Q, args.V_n, args.n_def)
    period = args.period * NM if args.period else None
    m = cavity_metrics(cav, emitter, period, args.label)
    print(emit_table([m], [args.label or "cavity"]), end="")
    if args.csv:
        write_metrics_csv(args.csv, [m])


def cmd_pipeline(args):
    from .pipeline import run_pipeline

    cfg = config_mod.load(args.config)
    if args.cache:
        cfg.override("output", "cache", args.cache)
    out = run_pipeline(cfg, args.out, args.jobs)
    for st in out.stages:
        print(f"{st['stage']:<9s} {st['status']}  {st['wall_time_s']:.1f} s")
    if "metrics" in out.results:
        from .pipeline import emit_table

        print(emit_table([out.results["metrics"]]), end="")
    print(out.directory / "manifest.json")


def selftest_checks():
    """Fast end-to-end checks of every module; yields (name, ok, detail)."""
    from . import fdtd, pwe
    from .geometry import DielectricGrid, UnitCell, WoodpileSpec, primitive_cell
    from .modevol import FieldSnapshot, mode_volume
    from .specfit import ModeEstimate, RingdownSignal, harmonic_inversion, synthesize
    from .tables import load_rows

    cell = primitive_cell(WoodpileSpec.fcc(1.0))
    cell = UnitCell(cell.vectors, cell.basis, 1.5, 1.5, cell.a, cell.c)
    path = pwe.KPath.woodpile(cell, ("X", "L"), 2)
    bs = pwe.band_structure(cell, path, pwe.SolverConfig(n_pw=40, n_bands=2))
    k = np.linalg.norm(path.frac @ cell.reciprocal, axis=1)
    err = float(np.max(np.abs(bs.frequencies[:, 0] / (cell.c * k / (2 * math.pi * 1.5)) - 1)))
    yield "pwe light line", err < 1e-3, f"max rel error {err:.1e}"

    n, d = 12, 1e-8
    grid = DielectricGrid(np.ones((n, n, n)), (d, d, d), (-n * d / 2,) * 3, (np.ones((n, n, n)),) * 3)
    f0 = fdtd.C0 / (8 * d)
    src = fdtd.DipoleSource(tuple(fdtd.component_position(grid, (6, 6, 6), "ez")), "ez", f0, f0)
    dt = fdtd.courant_dt(grid.spacing)
    off = int(math.ceil(src.off_time / dt))
    res = fdtd.run(fdtd.SimulationConfig(grid, off + 500, src, fdtd.PEC, energy_every=25))
    w = res.energy[res.energy_steps > off]
    drift = float((w.max() - w.min()) / w.mean())
    yield "fdtd energy", drift < 1e-4, f"PEC drift {drift:.1e}"

    truth = [ModeEstimate(3.1e14, 3.1e14 * math.pi / 2000, 1.0), ModeEstimate(3.4e14, 3.4e14 * math.pi / 800, 0.5)]
    dt = 1e-16
    x = synthesize(truth, 3000, dt)
    found = harmonic_inversion(RingdownSignal(x, dt), band=(2.5e14, 4e14))
    ok = len(found) == 2 and all(
        abs(f.frequency / t.frequency - 1) < 1e-4 and abs(f.Q / t.Q - 1) < 1e-2
        for f, t in zip(sorted(found, key=lambda m: m.frequency), truth)
    )
    yield "harmonic inversion", ok, f"{len(found)} modes"

    ones = np.ones((4, 5, 6))
    snap = FieldSnapshot(ones + 0j, 0 * ones + 0j, 0 * ones + 0j, ones, (1.0, 1.0, 1.0))
    v = mode_volume(snap).V_eff
    yield "mode volume box", abs(v - 120) < 1e-12 * 120, f"V = {v}"

    d1 = next(r for r in load_rows() if r.label == "D1/Ex")
    m = cavity_metrics(d1.cavity, EmitterSpec.nv_centre())
    g = m.g / (2 * math.pi * 1e9)
    yield "cqed D1/Ex", abs(g / 6.37 - 1) < 0.01, f"g_R/2pi = {g:.3f} GHz"


def cmd_selftest(args):
    failed = 0
    for name, ok, detail in selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name:<20s} {detail}")
        failed += not ok
    if failed:
        from .errors import NumericError

        raise NumericError(f"{failed} self-test check(s) failed")


# --- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="woodpile", description="Woodpile photonic-crystal cavity toolkit.")
    ap.add_argument("--jobs", type=int, default=None, help="cap on worker threads and processes")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", help="band structure and gap report")
    p.add_argument("--config")
    p.add_argument("--plane-waves", type=int)
    p.add_argument("--path", help="k-point labels, e.g. 'G X W L' (G = Gamma)")
    p.add_argument("--points", type=int, help="points per path segment")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("sweep", help="gap-midgap ratio against rod width")
    p.add_argument("--config")
    p.add_argument("--range", help="w/c values: start:stop:step or a list")
    p.add_argument("--plane-waves", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("resonate", help="FDTD ringdown of the defect cavity and mode fit")
    p.add_argument("--config")
    p.add_argument("--resolution", type=float, help="cells per in-layer pitch a")
    p.add_argument("--steps", type=int)
    p.add_argument("--boundary", choices=("pml", "pec"))
    p.add_argument("--orientation", choices=("ex", "ey", "ez"))
    p.add_argument("--probe", type=float, nargs=3, metavar=("DX", "DY", "DZ"), help="probe offset from the defect centre (nm)")
    p.add_argument("--snapshot", action="store_true", help="also record the mode snapshot")
    p.add_argument("--cache", help="reuse FDTD runs stored in this directory")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_resonate)

    p = sub.add_parser("fit", help="harmonic inversion of a probe CSV")
    p.add_argument("probe")
    p.add_argument("--period", type=float, help="vertical period c (nm), enables c/lambda output")
    p.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"), help="fit band in c/lambda")
    p.add_argument("--start", type=int, default=0, help="first sample of the fit window")
    p.add_argument("--max-modes", type=int, default=12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("modevol", help="mode volume of a snapshot")
    p.add_argument("snapshot", help="snapshot stem (files <stem>_ex.bin ...)")
    p.add_argument("--wavelength", type=float, help="nm; default from the snapshot frequency")
    p.add_argument("--n-def", type=float, default=3.3)
    p.add_argument("--linecut", nargs="*", choices=("x", "y", "z"))
    p.add_argument("--linecut-prefix", default="linecut")
    p.add_argument("--period", type=float, help="nm, adds reduced coordinates to line cuts")
    p.add_argument("--out")
    p.set_defaults(func=cmd_modevol)

    p = sub.add_parser("cqed", help="cavity-QED metrics, or 'cqed table' to replay the bundled tables")
    p.add_argument("what", nargs="?", choices=("table",))
    p.add_argument("--Q", type=float)
    p.add_argument("--V-eff", type=float, help="um^3")
    p.add_argument("--V-n", type=float, help="in units of (lambda/n)^3")
    p.add_argument("--wavelength", type=float, help="nm")
    p.add_argument("--n-def", type=float, default=3.3)
    p.add_argument("--period", type=float, help="nm")
    p.add_argument("--emitter", default="NV")
    p.add_argument("--label", default="")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_cqed)

    p = sub.add_parser("pipeline", help="run every stage requested by a config")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--cache")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("selftest", help="quick end-to-end checks")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_jobs(args.jobs)
    try:
        args.func(args)
    except WoodpileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError as exc:
        print(f"error: out of memory: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
