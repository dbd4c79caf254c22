"""Defect-cavity runs: grid, source and probe placement, ringdown fit, mode snapshot."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import c as C0

from . import fdtd
from .errors import DomainError, ResolutionError
from .geometry import WoodpileSpec, build_scene, voxelize
from .modevol import FieldSnapshot, mode_volume
from .specfit import ModeEstimate, RingdownSignal, harmonic_inversion

# full-gap edges of the FCC woodpile used for in-gap selection (c / lambda)
GAP_EDGES = (0.4853, 0.5689)
MIDGAP = 0.5271


@dataclass(frozen=True)
class CavityRunConfig:
    """Numerical settings for a defect-cavity FDTD run.

    Frequencies are reduced (c / lambda, with c the vertical period).
    """

    resolution: float = 16.0  # cells per in-layer pitch a
    n_steps: int = 8000
    orientation: str = "ex"
    pml_cells: int = 8
    padding_cells: int = 6
    subpixel: bool = True
    centre: float = MIDGAP
    bandwidth: float = 0.16
    band: tuple[float, float] = GAP_EDGES
    max_modes: int = 12
    probe_offset: tuple[float, float, float] | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.orientation not in fdtd.COMPONENTS:
            raise DomainError(f"orientation must be one of {fdtd.COMPONENTS}")
        if self.resolution <= 0 or self.n_steps < 1:
            raise DomainError("resolution and n_steps must be positive")
        if not self.band[0] < self.band[1]:
            raise DomainError("fit band must be increasing")


@dataclass
class Resonance:
    mode: ModeEstimate
    reduced: float
    wavelength: float
    all_modes: list[ModeEstimate]
    run: fdtd.RunResult
    window_start: int
    meta: dict = field(default_factory=dict)

    @property
    def Q(self) -> float:
        return self.mode.Q


def _axis(orientation: str) -> int:
    return fdtd.COMPONENTS.index(orientation)


def cavity_grid(spec: WoodpileSpec, cfg: CavityRunConfig):
    """Voxelized scene with the defect centre on a sample of the source component."""
    scene = build_scene(spec)
    h = spec.a / cfg.resolution
    # the source component sits half a cell above its node along its own axis
    align = np.zeros(3)
    align[_axis(cfg.orientation)] = -0.5 * h
    align[:2] += spec.defect_offset
    pad = (cfg.pml_cells + cfg.padding_cells) * h
    return voxelize(scene, cfg.resolution, padding=pad, subpixel=cfg.subpixel, yee=True,
                    align=tuple(align))


def default_probe_offset(spec: WoodpileSpec, orientation: str) -> np.ndarray:
    """A quarter of the defect size away from the source: +x, +y or -z."""
    if spec.defect is None:
        raise DomainError("structure has no defect")
    ax = _axis(orientation)
    off = np.zeros(3)
    off[ax] = 0.25 * spec.defect.size[ax] * (-1 if ax == 2 else 1)
    return off


def source_probe(spec: WoodpileSpec, cfg: CavityRunConfig):
    centre = np.array([*spec.defect_offset, 0.0])
    f0 = cfg.centre * C0 / spec.c
    src = fdtd.DipoleSource(tuple(centre), cfg.orientation, f0, cfg.bandwidth * C0 / spec.c)
    off = np.asarray(cfg.probe_offset) if cfg.probe_offset is not None else default_probe_offset(spec, cfg.orientation)
    probe = fdtd.ProbeSpec(tuple(centre + off), (cfg.orientation,), "probe")
    return src, probe


def simulation(spec: WoodpileSpec, cfg: CavityRunConfig, monitors=(), grid=None) -> fdtd.SimulationConfig:
    grid = cavity_grid(spec, cfg) if grid is None else grid
    src, probe = source_probe(spec, cfg)
    return fdtd.SimulationConfig(
        grid, cfg.n_steps, src, fdtd.PMLSpec(cfg.pml_cells) if cfg.pml_cells else fdtd.PEC,
        (probe,), tuple(monitors), threads=cfg.threads,
    )


def window_start(src: fdtd.DipoleSource, dt: float) -> int:
    """First step of the ringdown window: three pulse delays."""
    return int(math.ceil(3 * src.t0 / dt))


def fit_ringdown(samples, dt, spec: WoodpileSpec, cfg: CavityRunConfig, start: int):
    """In-gap modes of the probe trace after ``start``, strongest first."""
    tail = np.asarray(samples)[start:]
    hz = C0 / spec.c
    band = (cfg.band[0] * hz, cfg.band[1] * hz)
    modes = harmonic_inversion(RingdownSignal(tail, dt, band), max_modes=cfg.max_modes, band=band)
    modes = [m for m in modes if not m.growing and band[0] <= m.frequency <= band[1]]
    if not modes:
        raise ResolutionError("no decaying in-gap resonance found in the probe trace")
    return modes


def resonate(spec: WoodpileSpec, cfg: CavityRunConfig, grid=None) -> Resonance:
    """Ringdown run and harmonic-inversion fit of the strongest in-gap mode."""
    sim = simulation(spec, cfg, grid=grid)
    res = fdtd.run(sim)
    start = window_start(sim.source, res.dt)
    if cfg.n_steps - start < 64:
        raise DomainError(f"run too short: ringdown window opens at step {start} of {cfg.n_steps}")
    modes = fit_ringdown(res.probes["probe"], res.dt, spec, cfg, start)
    best = modes[0]
    return Resonance(best, best.reduced(spec.c), best.wavelength(), modes, res, start,
                     {"grid_shape": list(sim.grid.shape)})


def mode_snapshot(spec: WoodpileSpec, cfg: CavityRunConfig, frequency: float, grid=None) -> FieldSnapshot:
    """DFT of the ringdown at ``frequency`` (Hz) over the source-free window."""
    mon = fdtd.DftMonitor((frequency,), stride=2)
    sim = simulation(spec, cfg, (mon,), grid=grid)
    res = fdtd.run(sim)
    snap = res.snapshots[0]
    snap.meta.update({"probe_steps": cfg.n_steps})
    return snap


def defect_contains(spec: WoodpileSpec, point) -> bool:
    if spec.defect is None:
        return False
    centre = np.array([*spec.defect_offset, 0.0])
    half = 0.5 * np.asarray(spec.defect.size)
    p = np.asarray(point)
    return bool(np.all(np.abs(p - centre) <= half + 1e-12))


def desk_spec(n_layers: int = 17, n_rods: int = 7, c: float = 335.8e-9, defect: str = "D1") -> WoodpileSpec:
    return WoodpileSpec.fcc(c, defect=defect, n_layers=n_layers, n_rods=n_rods)


def mode_volume_report(spec: WoodpileSpec, snap: FieldSnapshot, wavelength: float) -> dict:
    from .cqed import normalized_volume

    mv = mode_volume(snap)
    return {
        "V_eff_um3": mv.V_eff * 1e18,
        "V_n": normalized_volume(mv.V_eff, wavelength, spec.n_def),
        "argmax_position_nm": [p * 1e9 for p in mv.position],
        "argmax_in_defect": defect_contains(spec, mv.position),
    }


# --- cached desk study --------------------------------------------------------------------

_CODE_MODULES = ("fdtd", "geometry")
# bump when the run setup in this module changes (grid alignment, source, probe)
RUN_SCHEMA = 1


def code_hash() -> str:
    """Digest of the solver sources; cached runs are invalidated when they change."""
    from importlib import resources

    h = hashlib.sha256(str(RUN_SCHEMA).encode())
    for name in _CODE_MODULES:
        h.update(resources.files("woodpile").joinpath(f"{name}.py").read_bytes())
    return h.hexdigest()[:16]


def _run_key(spec: WoodpileSpec, cfg: CavityRunConfig, kind: str, extra=None) -> str:
    cfg_key = dataclasses.replace(cfg, threads=None)
    text = json.dumps([kind, repr(spec), repr(cfg_key), extra, code_hash()], sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:20]


def cached_trace(spec: WoodpileSpec, cfg: CavityRunConfig, cache_dir) -> tuple[np.ndarray, float, dict]:
    """Probe trace of a ringdown run, computed once per (spec, config, code)."""
    cache = Path(cache_dir)
    stem = cache / f"trace_{_run_key(spec, cfg, 'trace')}"
    if stem.with_suffix(".npy").exists():
        meta = json.loads(stem.with_suffix(".json").read_text())
        return np.load(stem.with_suffix(".npy")), meta["dt"], meta
    sim = simulation(spec, cfg)
    res = fdtd.run(sim)
    meta = {
        "dt": res.dt,
        "window_start": window_start(sim.source, res.dt),
        "grid_shape": list(sim.grid.shape),
        "wall_time_s": res.wall_time,
        "steps_per_second": res.steps_per_second,
        "n_layers": spec.n_layers,
        "n_rods": spec.n_rods,
    }
    cache.mkdir(parents=True, exist_ok=True)
    np.save(stem.with_suffix(".npy"), res.probes["probe"])
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=1))
    return res.probes["probe"], res.dt, meta


def cached_resonance(spec: WoodpileSpec, cfg: CavityRunConfig, cache_dir) -> tuple[list[ModeEstimate], dict]:
    trace, dt, meta = cached_trace(spec, cfg, cache_dir)
    return fit_ringdown(trace, dt, spec, cfg, meta["window_start"]), meta


def cached_snapshot(spec: WoodpileSpec, cfg: CavityRunConfig, frequency: float, cache_dir) -> FieldSnapshot:
    """Mode snapshot at ``frequency``; the key rounds it to 1e-6 relative."""
    f_key = float(f"{frequency:.6e}")
    stem = Path(cache_dir) / f"snap_{_run_key(spec, cfg, 'snap', f_key)}"
    if Path(f"{stem}_eps.bin").exists():
        return FieldSnapshot.read(stem)
    snap = mode_snapshot(spec, cfg, f_key)
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    snap.write(stem)
    return snap


DESK_LAYERS = (13, 17, 21)
DESK_CONFIG = CavityRunConfig(n_steps=12000)


def desk_study(cache_dir, layers=DESK_LAYERS, cfg: CavityRunConfig = DESK_CONFIG, snapshot_layers: int = 17,
               n_rods: int = 7) -> dict:
    """D1 ringdowns for each layer count plus a mode snapshot for one of them.

    Returns per-layer fits and, for ``snapshot_layers``, the mode-volume
    report.  Every FDTD run is cached in ``cache_dir``.
    """
    out = {"layers": {}, "config": repr(cfg), "code": code_hash()}
    for nl in layers:
        spec = desk_spec(nl, n_rods)
        modes, meta = cached_resonance(spec, cfg, cache_dir)
        best = modes[0]
        row = {
            "c_over_lambda": best.reduced(spec.c),
            "lambda_nm": best.wavelength() * 1e9,
            "Q": best.Q,
            "fit_error": best.error,
            "in_gap_modes": [(m.reduced(spec.c), m.Q, abs(m.amplitude)) for m in modes],
            **meta,
        }
        if nl == snapshot_layers:
            snap = cached_snapshot(spec, cfg, best.frequency, cache_dir)
            row["mode_volume"] = mode_volume_report(spec, snap, best.wavelength())
        out["layers"][nl] = row
    return out
