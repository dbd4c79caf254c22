"""End-to-end runs driven by a configuration document.

Stages run in dependency order: bands, sweep, resonate (FDTD ringdown and
fit), modevol (mode snapshot) and cqed.  Each stage runs only if its
section is present; every written file is listed in ``manifest.json`` with
its SHA-256.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field, replace
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cavity, fdtd, modevol, pwe
from .config import PipelineConfig
from .cqed import CavityMetrics, CavitySpec, EmitterSpec, cavity_metrics
from .errors import ConfigurationError, WoodpileError
from .geometry import BufferSpec, DefectSpec, WoodpileSpec, primitive_cell
from .specfit import write_modes_csv

ASCII_LABELS = {"G": "Γ", "Gamma": "Γ"}


@dataclass
class Bundle:
    directory: Path
    files: dict[str, str] = field(default_factory=dict)
    stages: list[dict] = field(default_factory=list)
    results: dict = field(default_factory=dict)

    def add(self, name: str) -> Path:
        path = self.directory / name
        self.files[name] = ""
        return path

    def hash_files(self) -> None:
        for name in self.files:
            self.files[name] = hashlib.sha256((self.directory / name).read_bytes()).hexdigest()


def structure(cfg: PipelineConfig) -> WoodpileSpec:
    s = cfg["structure"]
    c = s["period"]
    a = c / s["c_over_a"]
    w = s["w_over_c"] * c
    defect = None if s["defect"].lower() == "none" else s["defect"]
    buffer = None if s["buffer"].lower() == "none" else s["buffer"]
    d = DefectSpec.preset(defect, c) if defect else None
    b = BufferSpec.preset(buffer, a, w, c) if buffer else None
    if b is not None and d is None:
        raise ConfigurationError("an air buffer needs a defect inside it")
    return WoodpileSpec(
        c=c, a=a, w=w, h=s["h_over_c"] * c, n_layers=s["layers"], n_rods=s["rods"],
        n_wp=s["n_rod"], n_def=s["n_defect"], n_bf=s["n_buffer"], defect=d, buffer=b,
    )


def bulk(spec: WoodpileSpec) -> WoodpileSpec:
    return replace(spec, defect=None, buffer=None)


def path_labels(text: str) -> tuple[str, ...]:
    if not text.strip():
        return pwe.DEFAULT_PATH
    return tuple(ASCII_LABELS.get(t, t) for t in text.replace(",", " ").split())


def run_config(cfg: PipelineConfig, jobs: int | None = None) -> cavity.CavityRunConfig:
    f, fit = cfg["fdtd"], cfg["fit"]
    boundary = f["boundary"].lower()
    if boundary not in ("pml", "pec"):
        raise ConfigurationError(f"boundary must be 'pml' or 'pec', got {f['boundary']!r}")
    threads = jobs or f["threads"] or None
    return cavity.CavityRunConfig(
        resolution=float(f["resolution"]),
        n_steps=f["steps"],
        orientation=f["orientation"].lower(),
        pml_cells=int(f["pml"]) if boundary == "pml" else 0,
        padding_cells=int(f["padding"]),
        subpixel=f["subpixel"],
        centre=f["centre"],
        bandwidth=f["bandwidth"],
        band=tuple(fit["band"]),
        max_modes=fit["max_modes"],
        probe_offset=None if f["probe_offset"] is None else tuple(f["probe_offset"]),
        threads=threads,
    )


def emitter(cfg: PipelineConfig) -> EmitterSpec:
    e = cfg["emitter"]
    explicit = [k for k in ("wavelength", "linewidth", "lifetime", "n_host") if e[k] is not None]
    if not explicit:
        if e["preset"].upper() not in ("NV", "NV-ZPL"):
            raise ConfigurationError(f"unknown emitter preset {e['preset']!r}")
        return EmitterSpec.nv_centre()
    if len(explicit) < 3 or e["wavelength"] is None or e["linewidth"] is None or e["n_host"] is None:
        raise ConfigurationError("explicit emitter needs wavelength, linewidth and n_host")
    rate = None if e["lifetime"] is None else 1.0 / e["lifetime"]
    # linewidth is given as a FWHM in Hz
    return EmitterSpec(e["wavelength"], 2 * math.pi * e["linewidth"], e["n_host"], rate, "custom")


def write_probe_csv(path, trace: np.ndarray, dt: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "time", "value"])
        for i, v in enumerate(trace):
            w.writerow([i + 1, repr(float((i + 1) * dt)), repr(float(v))])


# --- table rendering ------------------------------------------------------------------

TABLE_ROWS = (
    ("c/lambda0", "c/λ0", "{:.4f}"),
    ("lambda0_nm", "λ0 (nm)", "{:.2f}"),
    ("Q", "Q", "{:.2e}"),
    ("V_eff_um3", "V_eff (µm³)", "{:.2e}"),
    ("V_n", "V_n", "{:.3f}"),
    ("F_p", "F_p", "{:.2e}"),
    ("kappa/2pi_GHz", "κ/2π (GHz)", "{:.2f}"),
    ("tau_uc_ns", "τ_uc (ns)", "{:.2e}"),
    ("V_eff_os_um3", "V'_eff (µm³)", "{:.2e}"),
    ("kappa_os/2pi_GHz", "κ'/2π (GHz)", "{:.2f}"),
    ("tau_os_ns", "τ' (ns)", "{:.2e}"),
    ("E_sp_V/m (reconstructed)", "E_sp (V/m)", "{:.2e}"),
    ("g_R/2pi_GHz", "g_R/2π (GHz)", "{:.2f}"),
    ("tau_R_ns", "τ_R (ns)", "{:.2f}"),
    ("4g/(kappa+gamma)", "4g/(κ+γ)", "{:.3f}"),
)


def emit_table(rows: Sequence[CavityMetrics | None], labels: Sequence[str] | None = None) -> str:
    """Quantities down, cavities across; missing resonances print as n/a."""
    if not rows:
        raise ConfigurationError("emit_table needs at least one row")
    labels = list(labels) if labels is not None else [m.label if m else "" for m in rows]
    cols = []
    for m in rows:
        rep = m.report() if m is not None else None
        cells = []
        for key, _, fmt in TABLE_ROWS:
            v = None if rep is None else rep.get(key)
            cells.append("n/a" if v is None or (isinstance(v, float) and math.isnan(v)) else fmt.format(v))
        cols.append(cells)
    head_w = max(len(name) for _, name, _ in TABLE_ROWS)
    widths = [max(len(lab), *(len(c) for c in col)) for lab, col in zip(labels, cols)]
    lines = [" " * head_w + "".join(f"  {lab:>{w}}" for lab, w in zip(labels, widths))]
    for i, (_, name, _) in enumerate(TABLE_ROWS):
        lines.append(f"{name:<{head_w}}" + "".join(f"  {col[i]:>{w}}" for col, w in zip(cols, widths)))
    return "\n".join(lines) + "\n"


def replay_metrics(row, emitter: EmitterSpec) -> CavityMetrics | None:
    """Metrics for one published table column; the period comes from its c/lambda0."""
    if row.cavity is None:
        return None
    period = row.printed["c/lambda0"] * row.cavity.wavelength
    return cavity_metrics(row.cavity, emitter, period, row.label)


def write_metrics_csv(path, rows: Sequence[CavityMetrics]) -> None:
    reps = [m.report() for m in rows]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(reps[0]))
        for rep in reps:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in rep.values()])


# --- stages -------------------------------------------------------------------------------


def _bands(cfg, spec, out: Bundle, jobs):
    b = cfg["bands"]
    cell = primitive_cell(bulk(spec))
    path = pwe.KPath.woodpile(cell, path_labels(b["path"]), b["points_per_segment"])
    bs = pwe.band_structure(cell, path, pwe.SolverConfig(n_pw=b["plane_waves"], n_bands=b["bands"], method=b["method"]))
    bs.write_csv(out.add("bands.csv"))
    gap = pwe.gap_midgap(bs)
    out.add("gap.txt").write_text(gap.text())
    out.results["gap"] = gap
    return {"plane_waves": bs.meta["n_pw"], "method": b["method"]}


def _sweep(cfg, spec, out: Bundle, jobs):
    s = cfg["sweep"]
    workers = min(s["workers"], jobs) if jobs else s["workers"]
    rows = pwe.sweep_rod_width(bulk(spec), s["w_over_c"], pwe.SolverConfig(n_pw=s["plane_waves"]),
                               pwe.DEFAULT_PATH, s["points_per_segment"], workers)
    pwe.write_sweep_csv(out.add("sweep.csv"), rows)
    out.results["sweep"] = rows
    return {"plane_waves": s["plane_waves"], "points": len(rows)}


def _resonate(cfg, spec, out: Bundle, jobs):
    rc = run_config(cfg, jobs)
    cache = cfg["output"]["cache"]
    if cache:
        trace, dt, meta = cavity.cached_trace(spec, rc, cache)
        start = meta["window_start"]
    else:
        sim = cavity.simulation(spec, rc)
        res = fdtd.run(sim)
        trace, dt = res.probes["probe"], res.dt
        start = cavity.window_start(sim.source, dt)
        meta = {"grid_shape": list(sim.grid.shape), "wall_time_s": res.wall_time}
    write_probe_csv(out.add("probe.csv"), trace, dt)
    modes = cavity.fit_ringdown(trace, dt, spec, rc, start)
    write_modes_csv(out.add("modes.csv"), modes, spec.c)
    out.results["modes"] = modes
    return {"resolution_cells_per_a": rc.resolution, "steps": rc.n_steps, "dt_s": dt,
            "window_start": start, "grid_shape": meta["grid_shape"], "pml_cells": rc.pml_cells}


def _modevol(cfg, spec, out: Bundle, jobs):
    rc = run_config(cfg, jobs)
    best = out.results["modes"][0]
    cache = cfg["output"]["cache"]
    snap = (cavity.cached_snapshot(spec, rc, best.frequency, cache) if cache
            else cavity.mode_snapshot(spec, rc, best.frequency))
    for comp in ("ex", "ey", "ez", "eps"):
        out.add(f"snapshot_{comp}.bin")
    snap.write(out.directory / "snapshot")
    rep = modevol.report(snap, best.wavelength(), spec.n_def)
    rep["argmax_in_defect"] = cavity.defect_contains(spec, np.asarray(rep["argmax_position_nm"]) * 1e-9)
    modevol.write_report(out.add("modevol.json"), rep)
    for axis, name in enumerate("xyz"):
        modevol.write_line_cut(out.add(f"linecut_{name}.csv"), snap, axis, period=spec.c)
    out.results["modevol"] = rep
    return {"V_eff_um3": rep["V_eff_um3"]}


def _cqed(cfg, spec, out: Bundle, jobs):
    best = out.results["modes"][0]
    rep = out.results["modevol"]
    cav = CavitySpec(best.wavelength(), best.Q, rep["V_eff_um3"] * 1e-18, spec.n_def)
    label = f"{cfg['structure']['defect']}/{cfg['fdtd']['orientation'].capitalize()}"
    m = cavity_metrics(cav, emitter(cfg), spec.c, label)
    write_metrics_csv(out.add("cavity_metrics.csv"), [m])
    out.add("cavity_metrics.txt").write_text(emit_table([m]))
    out.results["metrics"] = m
    return {"emitter": emitter(cfg).name}


STAGES = (
    ("bands", _bands),
    ("sweep", _sweep),
    ("resonate", _resonate),
    ("modevol", _modevol),
    ("cqed", _cqed),
)


def requested_stages(cfg: PipelineConfig) -> list[str]:
    want = []
    if cfg.has("bands"):
        want.append("bands")
    if cfg.has("sweep"):
        want.append("sweep")
    if cfg.has("fdtd"):
        want.append("resonate")
        if cfg["fdtd"]["snapshot"]:
            want.append("modevol")
    if cfg.has("emitter"):
        if "modevol" not in want:
            raise ConfigurationError("[emitter] needs an [fdtd] section with snapshot = yes")
        want.append("cqed")
    if not want:
        raise ConfigurationError("config requests no stages (add [bands], [sweep] or [fdtd])")
    return want


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def run_pipeline(cfg: PipelineConfig, directory=None, jobs: int | None = None) -> Bundle:
    """Run the requested stages, writing artifacts and ``manifest.json``.

    A failing stage re-raises its error prefixed with the stage name; files
    from earlier stages stay on disk and the manifest records the failure.
    """
    stages = requested_stages(cfg)
    spec = structure(cfg)
    out = Bundle(Path(directory or cfg["output"]["directory"]))
    out.directory.mkdir(parents=True, exist_ok=True)
    resolutions = {}
    failure = None
    for name, fn in STAGES:
        if name not in stages:
            continue
        t0 = time.perf_counter()
        try:
            resolutions[name] = fn(cfg, spec, out, jobs)
        except WoodpileError as exc:
            out.stages.append({"stage": name, "status": "failed", "wall_time_s": time.perf_counter() - t0})
            exc.args = (f"stage '{name}' failed: {exc}", *exc.args[1:])
            failure = exc
            break
        out.stages.append({"stage": name, "status": "ok", "wall_time_s": time.perf_counter() - t0})
    out.files = {k: v for k, v in out.files.items() if (out.directory / k).exists()}
    out.hash_files()
    manifest = {
        "config": cfg.source,
        "config_values": {s: {k: v for k, v in cfg[s].items()} for s in sorted(cfg.present)},
        "versions": _versions(),
        # the only random numbers are the fixed LOBPCG start vectors
        "seeds": {"lobpcg_start": 0},
        "resolutions": resolutions,
        "stages": out.stages,
        "files": out.files,
    }
    (out.directory / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    if failure is not None:
        raise failure
    return out
