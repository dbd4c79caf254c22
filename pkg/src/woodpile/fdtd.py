"""Yee-grid FDTD with CPML or PEC walls.

Layout: nodes are the cell centres of the dielectric grid.  Ex[i, j, k]
sits half a cell above node (i, j, k) along x, Ey along y, Ez along z;
Hx[i, j, k] sits at node + (0, 1/2, 1/2) and so on.  The outer node planes
are perfect conductors; with CPML the outermost ``cells`` nodes on every
side absorb.

Arrays are Fortran ordered so that the parallel loop over z walks
contiguous slabs.  Field updates carry no reductions, so results do not
depend on the thread count.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from numba import njit, prange
from scipy.constants import c as C0, epsilon_0 as EPS0, mu_0 as MU0

from .errors import ConfigurationError, DomainError, ResourceError, StabilityError
from .geometry import DielectricGrid
from .modevol import FieldSnapshot

COMPONENTS = ("ex", "ey", "ez")
ETA0 = math.sqrt(MU0 / EPS0)
DEFAULT_MEMORY_CAP = 3 * 2**30


def courant_dt(spacing: Sequence[float], safety: float = 0.99) -> float:
    """``safety`` times the 3D Courant limit for the given cell sizes."""
    if not 0 < safety <= 1:
        raise DomainError(f"Courant safety factor must lie in (0, 1], got {safety}")
    dx, dy, dz = spacing
    return safety / (C0 * math.sqrt(dx**-2 + dy**-2 + dz**-2))


# --- configuration -------------------------------------------------------------------


@dataclass(frozen=True)
class PMLSpec:
    """Graded CPML; ``cells = 0`` gives bare PEC walls."""

    cells: int = 10
    order: float = 3.0
    reflection: float = 1e-8
    kappa_max: float = 1.0
    alpha_fraction: float = 0.05  # alpha_max as a fraction of sigma_max

    def __post_init__(self):
        if self.cells != 0 and self.cells < 4:
            raise ConfigurationError(f"PML needs at least 4 cells (or 0 for PEC), got {self.cells}")
        if not 0 < self.reflection < 1 or self.order < 1 or self.kappa_max < 1:
            raise ConfigurationError("PML grading parameters out of range")


PEC = PMLSpec(cells=0)


@dataclass(frozen=True)
class DipoleSource:
    """Soft point source with a Gaussian-modulated sine.

    ``bandwidth`` is the full spectral width at which the pulse amplitude
    spectrum has fallen to 1/e; ``delay`` defaults to four envelope widths.
    """

    position: tuple[float, float, float]
    component: str = "ex"
    frequency: float = 1.0
    bandwidth: float = 0.5
    amplitude: float = 1.0
    delay: float | None = None

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise ConfigurationError(f"source component must be one of {COMPONENTS}")
        if not (self.frequency > 0 and self.bandwidth > 0):
            raise ConfigurationError("source frequency and bandwidth must be positive")

    @property
    def tau(self) -> float:
        return 2.0 / (math.pi * self.bandwidth)

    @property
    def t0(self) -> float:
        return 4.0 * self.tau if self.delay is None else self.delay

    @property
    def off_time(self) -> float:
        """After this the envelope is below exp(-16) of its peak."""
        return self.t0 + 4.0 * self.tau

    def pulse(self, t):
        s = (np.asarray(t) - self.t0) / self.tau
        return self.amplitude * np.exp(-s * s) * np.sin(2 * math.pi * self.frequency * (np.asarray(t) - self.t0))


@dataclass(frozen=True)
class ProbeSpec:
    position: tuple[float, float, float]
    components: tuple[str, ...] = ("ex",)
    name: str = "probe"

    def __post_init__(self):
        bad = [c for c in self.components if c not in COMPONENTS]
        if bad:
            raise ConfigurationError(f"unknown probe components {bad}")


@dataclass(frozen=True)
class DftMonitor:
    """Running DFT of all E components at ``frequencies``.

    Accumulation starts at ``start`` (seconds; default three source delays)
    and uses every ``stride``-th step.
    """

    frequencies: tuple[float, ...]
    start: float | None = None
    stride: int = 1

    def __post_init__(self):
        if not self.frequencies or min(self.frequencies) <= 0:
            raise ConfigurationError("DFT monitor needs positive frequencies")
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")


@dataclass(frozen=True)
class SimulationConfig:
    grid: DielectricGrid
    n_steps: int
    source: DipoleSource
    boundary: PMLSpec = PMLSpec()
    probes: tuple[ProbeSpec, ...] = ()
    monitors: tuple[DftMonitor, ...] = ()
    dt: float | None = None
    safety: float = 0.99
    threads: int | None = None
    energy_every: int = 0
    ceiling: float = 1e15
    memory_cap: int = DEFAULT_MEMORY_CAP

    def __post_init__(self):
        if self.grid.eps_yee is None:
            raise ConfigurationError("grid lacks Yee-edge permittivities; voxelize with yee=True")
        limit = courant_dt(self.grid.spacing, 1.0)
        if self.dt is not None and not 0 < self.dt <= limit:
            raise ConfigurationError(f"dt = {self.dt:.4g} s violates the Courant bound {limit:.4g} s")
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be positive")
        if 2 * self.boundary.cells + 3 > min(self.grid.shape):
            raise ConfigurationError(f"grid {self.grid.shape} too small for {self.boundary.cells}-cell PML")
        src = snap_to_component(self.grid, self.source.position, self.source.component)
        for p in self.probes:
            for comp in p.components:
                if comp == self.source.component and snap_to_component(self.grid, p.position, comp) == src:
                    raise ConfigurationError(f"probe {p.name!r} sits on the source cell")

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else courant_dt(self.grid.spacing, self.safety)


def component_offset(comp: str) -> np.ndarray:
    """Position of component ``comp`` relative to a node, in cells."""
    off = np.zeros(3)
    off[COMPONENTS.index(comp)] = 0.5
    return off


def snap_to_component(grid: DielectricGrid, point, comp: str) -> tuple[int, int, int]:
    """Index of the ``comp`` sample nearest to ``point``."""
    rel = (np.asarray(point, float) - np.asarray(grid.origin)) / np.asarray(grid.spacing) - 0.5
    idx = np.rint(rel - component_offset(comp)).astype(int)
    if np.any(idx < 0) or np.any(idx >= np.asarray(grid.shape)):
        raise DomainError(f"point {tuple(point)} lies outside the grid")
    return tuple(int(v) for v in idx)


def component_position(grid: DielectricGrid, idx, comp: str) -> np.ndarray:
    return np.asarray(grid.origin) + (np.asarray(idx) + 0.5 + component_offset(comp)) * np.asarray(grid.spacing)


# --- kernels ------------------------------------------------------------------------


@njit(parallel=True, cache=True)
def _update_h(ex, ey, ez, hx, hy, hz, chx, chy, chz, ikx, iky, ikz):
    # ch* = dt / (mu0 d*) ; ik* = 1/kappa at half-integer positions
    nx, ny, nz = ex.shape
    for kk in prange(nz):
        k = np.int64(kk)
        if k < nz - 1:
            for j in range(ny - 1):
                for i in range(nx):
                    hx[i, j, k] -= (ez[i, j + 1, k] - ez[i, j, k]) * (chy * iky[j]) - (
                        ey[i, j, k + 1] - ey[i, j, k]
                    ) * (chz * ikz[k])
            for j in range(ny):
                for i in range(nx - 1):
                    hy[i, j, k] -= (ex[i, j, k + 1] - ex[i, j, k]) * (chz * ikz[k]) - (
                        ez[i + 1, j, k] - ez[i, j, k]
                    ) * (chx * ikx[i])
        for j in range(ny - 1):
            for i in range(nx - 1):
                hz[i, j, k] -= (ey[i + 1, j, k] - ey[i, j, k]) * (chx * ikx[i]) - (
                    ex[i, j + 1, k] - ex[i, j, k]
                ) * (chy * iky[j])


@njit(parallel=True, cache=True)
def _update_e(ex, ey, ez, hx, hy, hz, cex, cey, cez, idx, idy, idz, ikx, iky, ikz, ceiling, bad):
    # ce* = dt / (eps0 eps_r) per component ; ik* = 1/kappa at integer positions.
    # Tangential E on the outer node planes is never touched (PEC walls).
    # The ceiling test is negated so that NaN also raises the flag.
    nx, ny, nz = ex.shape
    for kk in prange(nz):
        k = np.int64(kk)
        flag = False
        if 0 < k < nz - 1:
            for j in range(1, ny - 1):
                for i in range(nx - 1):
                    ex[i, j, k] += cex[i, j, k] * (
                        (hz[i, j, k] - hz[i, j - 1, k]) * (idy * iky[j])
                        - (hy[i, j, k] - hy[i, j, k - 1]) * (idz * ikz[k])
                    )
                    flag |= not abs(ex[i, j, k]) < ceiling
            for j in range(ny - 1):
                for i in range(1, nx - 1):
                    ey[i, j, k] += cey[i, j, k] * (
                        (hx[i, j, k] - hx[i, j, k - 1]) * (idz * ikz[k])
                        - (hz[i, j, k] - hz[i - 1, j, k]) * (idx * ikx[i])
                    )
                    flag |= not abs(ey[i, j, k]) < ceiling
        if k < nz - 1:
            for j in range(1, ny - 1):
                for i in range(1, nx - 1):
                    ez[i, j, k] += cez[i, j, k] * (
                        (hy[i, j, k] - hy[i - 1, j, k]) * (idx * ikx[i])
                        - (hx[i, j, k] - hx[i, j - 1, k]) * (idy * iky[j])
                    )
                    flag |= not abs(ez[i, j, k]) < ceiling
        bad[k] = flag


@njit(cache=True)
def _layer(s, n, p):
    """Grid index of psi layer ``s`` (0 <= s < 2p)."""
    return s if s < p else n - 2 * p + s


# CPML corrections, one kernel per derivative axis.  psi arrays hold only the
# 2p boundary layers along that axis; the affected components and signs
# follow from the curl.  Index ranges mirror the main updates so that PEC
# walls stay untouched.


@njit(parallel=True, cache=True)
def _cpml_e_x(ey, ez, hy, hz, cey, cez, psi1, psi2, b, a, inv_d, p):
    nx, ny, nz = ey.shape
    for k in prange(nz):
        for j in range(ny):
            for s in range(2 * p):
                i = _layer(s, nx, p)
                if i == 0 or i == nx - 1:
                    continue
                if j < ny - 1 and 0 < k < nz - 1:
                    psi1[s, j, k] = b[s] * psi1[s, j, k] + a[s] * (hz[i, j, k] - hz[i - 1, j, k]) * inv_d
                    ey[i, j, k] -= cey[i, j, k] * psi1[s, j, k]
                if k < nz - 1 and 0 < j < ny - 1:
                    psi2[s, j, k] = b[s] * psi2[s, j, k] + a[s] * (hy[i, j, k] - hy[i - 1, j, k]) * inv_d
                    ez[i, j, k] += cez[i, j, k] * psi2[s, j, k]


@njit(parallel=True, cache=True)
def _cpml_e_y(ex, ez, hx, hz, cex, cez, psi1, psi2, b, a, inv_d, p):
    nx, ny, nz = ex.shape
    for k in prange(nz):
        for s in range(2 * p):
            j = _layer(s, ny, p)
            if j == 0 or j == ny - 1:
                continue
            for i in range(nx):
                if i < nx - 1 and 0 < k < nz - 1:
                    psi1[i, s, k] = b[s] * psi1[i, s, k] + a[s] * (hz[i, j, k] - hz[i, j - 1, k]) * inv_d
                    ex[i, j, k] += cex[i, j, k] * psi1[i, s, k]
                if k < nz - 1 and 0 < i < nx - 1:
                    psi2[i, s, k] = b[s] * psi2[i, s, k] + a[s] * (hx[i, j, k] - hx[i, j - 1, k]) * inv_d
                    ez[i, j, k] -= cez[i, j, k] * psi2[i, s, k]


@njit(parallel=True, cache=True)
def _cpml_e_z(ex, ey, hx, hy, cex, cey, psi1, psi2, b, a, inv_d, p):
    nx, ny, nz = ex.shape
    for sl in prange(2 * p):
        s = np.int64(sl)  # prange indices are unsigned
        k = _layer(s, nz, p)
        if k == 0 or k == nz - 1:
            continue
        for j in range(ny):
            for i in range(nx):
                if i < nx - 1 and 0 < j < ny - 1:
                    psi1[i, j, s] = b[s] * psi1[i, j, s] + a[s] * (hy[i, j, k] - hy[i, j, k - 1]) * inv_d
                    ex[i, j, k] -= cex[i, j, k] * psi1[i, j, s]
                if j < ny - 1 and 0 < i < nx - 1:
                    psi2[i, j, s] = b[s] * psi2[i, j, s] + a[s] * (hx[i, j, k] - hx[i, j, k - 1]) * inv_d
                    ey[i, j, k] += cey[i, j, k] * psi2[i, j, s]


@njit(parallel=True, cache=True)
def _cpml_h_x(ey, ez, hy, hz, ch, psi1, psi2, b, a, inv_d, p):
    nx, ny, nz = ey.shape
    for k in prange(nz):
        for j in range(ny):
            for s in range(2 * p):
                i = _layer(s, nx, p)
                if i == nx - 1:
                    continue
                if k < nz - 1:
                    psi1[s, j, k] = b[s] * psi1[s, j, k] + a[s] * (ez[i + 1, j, k] - ez[i, j, k]) * inv_d
                    hy[i, j, k] += ch * psi1[s, j, k]
                if j < ny - 1:
                    psi2[s, j, k] = b[s] * psi2[s, j, k] + a[s] * (ey[i + 1, j, k] - ey[i, j, k]) * inv_d
                    hz[i, j, k] -= ch * psi2[s, j, k]


@njit(parallel=True, cache=True)
def _cpml_h_y(ex, ez, hx, hz, ch, psi1, psi2, b, a, inv_d, p):
    nx, ny, nz = ex.shape
    for k in prange(nz):
        for s in range(2 * p):
            j = _layer(s, ny, p)
            if j == ny - 1:
                continue
            for i in range(nx):
                if k < nz - 1:
                    psi1[i, s, k] = b[s] * psi1[i, s, k] + a[s] * (ez[i, j + 1, k] - ez[i, j, k]) * inv_d
                    hx[i, j, k] -= ch * psi1[i, s, k]
                if i < nx - 1:
                    psi2[i, s, k] = b[s] * psi2[i, s, k] + a[s] * (ex[i, j + 1, k] - ex[i, j, k]) * inv_d
                    hz[i, j, k] += ch * psi2[i, s, k]


@njit(parallel=True, cache=True)
def _cpml_h_z(ex, ey, hx, hy, ch, psi1, psi2, b, a, inv_d, p):
    nx, ny, nz = ex.shape
    for sl in prange(2 * p):
        s = np.int64(sl)  # prange indices are unsigned
        k = _layer(s, nz, p)
        if k == nz - 1:
            continue
        for j in range(ny):
            for i in range(nx):
                if j < ny - 1:
                    psi1[i, j, s] = b[s] * psi1[i, j, s] + a[s] * (ey[i, j, k + 1] - ey[i, j, k]) * inv_d
                    hx[i, j, k] += ch * psi1[i, j, s]
                if i < nx - 1:
                    psi2[i, j, s] = b[s] * psi2[i, j, s] + a[s] * (ex[i, j, k + 1] - ex[i, j, k]) * inv_d
                    hy[i, j, k] -= ch * psi2[i, j, s]


@njit(parallel=True, cache=True)
def _dft_accumulate(ex, ey, ez, fx, fy, fz, w):
    nx, ny, nz = ex.shape
    for k in prange(nz):
        for j in range(ny):
            for i in range(nx):
                fx[i, j, k] += w * ex[i, j, k]
                fy[i, j, k] += w * ey[i, j, k]
                fz[i, j, k] += w * ez[i, j, k]


# --- CPML profiles ---------------------------------------------------------------------


def _profile(n: int, spec: PMLSpec, d: float, dt: float, half: bool):
    """(b, a, 1/kappa) along one axis; slab arrays hold the 2p boundary layers."""
    p = spec.cells
    ik = np.ones(n)
    if p == 0:
        return np.zeros(0), np.zeros(0), ik
    pos = np.arange(n) + (0.5 if half else 0.0)
    depth = np.clip(np.maximum(p - pos, pos - (n - 1 - p)) / p, 0.0, 1.0)
    m = spec.order
    sigma_max = -(m + 1) * math.log(spec.reflection) / (2 * ETA0 * p * d)
    sigma = sigma_max * depth**m
    kappa = 1 + (spec.kappa_max - 1) * depth**m
    alpha = spec.alpha_fraction * sigma_max * (1 - depth) * (depth > 0)
    ik = 1.0 / kappa
    b = np.exp(-(sigma / kappa + alpha) * dt / EPS0)
    denom = sigma * kappa + kappa**2 * alpha
    a = np.where(denom > 0, sigma * (b - 1) / np.where(denom > 0, denom, 1.0), 0.0)
    slab = np.r_[np.arange(p), np.arange(n - p, n)]
    return b[slab].copy(), a[slab].copy(), ik


# --- results -----------------------------------------------------------------------------


@dataclass
class RunResult:
    dt: float
    times: np.ndarray
    probes: dict[str, np.ndarray]
    snapshots: list[FieldSnapshot]
    energy_steps: np.ndarray
    energy: np.ndarray
    wall_time: float
    meta: dict = field(default_factory=dict)

    @property
    def steps_per_second(self) -> float:
        return len(self.times) / self.wall_time if self.wall_time > 0 else math.inf

    def write_probe_csv(self, path, name: str | None = None) -> None:
        key = name or next(iter(self.probes))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "value"])
            for i, (t, v) in enumerate(zip(self.times, self.probes[key])):
                w.writerow([i + 1, repr(float(t)), repr(float(v))])


def _estimate_bytes(cfg: SimulationConfig) -> int:
    n = int(np.prod(cfg.grid.shape))
    p = cfg.boundary.cells
    psi = 0
    if p:
        for ax in range(3):
            psi += 4 * n * 2 * p // cfg.grid.shape[ax]
    n_freq = sum(len(m.frequencies) for m in cfg.monitors)
    return 8 * (9 * n + psi) + 16 * 3 * n * n_freq


def energy(grid_eps, e, h_old, h_new, spacing) -> float:
    """Discrete electromagnetic energy at integer time n: eps E^n.E^n and mu H^(n-1/2).H^(n+1/2)."""
    dv = float(np.prod(spacing))
    we = sum(float(np.sum(eps * f * f)) for eps, f in zip(grid_eps, e))
    wh = sum(float(np.sum(a * b)) for a, b in zip(h_old, h_new))
    return 0.5 * dv * (EPS0 * we + MU0 * wh)


def run(cfg: SimulationConfig) -> RunResult:
    """Leapfrog ``cfg.n_steps`` steps; probes record E after every update."""
    need = _estimate_bytes(cfg)
    if need > cfg.memory_cap:
        raise ResourceError(
            f"run needs {need / 2**30:.2f} GiB, cap is {cfg.memory_cap / 2**30:.2f} GiB", required_bytes=need
        )
    prev_threads = numba.get_num_threads()
    if cfg.threads:
        numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return _run(cfg)
    finally:
        numba.set_num_threads(prev_threads)


def _run(cfg: SimulationConfig) -> RunResult:
    grid = cfg.grid
    shape = grid.shape
    dx, dy, dz = grid.spacing
    dt = cfg.time_step
    zeros = lambda: np.zeros(shape, order="F")
    ex, ey, ez, hx, hy, hz = (zeros() for _ in range(6))
    eps_e = tuple(np.asfortranarray(a, dtype=np.float64) for a in grid.eps_yee)
    cex, cey, cez = (dt / (EPS0 * e) for e in eps_e)
    cex, cey, cez = (np.asfortranarray(c) for c in (cex, cey, cez))

    bnd = cfg.boundary
    p = bnd.cells
    prof_e = [_profile(n, bnd, d, dt, False) for n, d in zip(shape, grid.spacing)]
    prof_h = [_profile(n, bnd, d, dt, True) for n, d in zip(shape, grid.spacing)]
    psi_e, psi_h = [], []
    if p:
        for ax in range(3):
            s = list(shape)
            s[ax] = 2 * p
            psi_e.append((np.zeros(s, order="F"), np.zeros(s, order="F")))
            psi_h.append((np.zeros(s, order="F"), np.zeros(s, order="F")))

    src = cfg.source
    src_comp = COMPONENTS.index(src.component)
    src_idx = snap_to_component(grid, src.position, src.component)
    fields_e = (ex, ey, ez)
    fields_h = (hx, hy, hz)

    probe_idx = []
    for pr in cfg.probes:
        for comp in pr.components:
            key = pr.name if len(pr.components) == 1 else f"{pr.name}_{comp}"
            probe_idx.append((key, COMPONENTS.index(comp), snap_to_component(grid, pr.position, comp)))
    traces = {key: np.empty(cfg.n_steps) for key, _, _ in probe_idx}

    monitors = []
    for mon in cfg.monitors:
        start = 3 * src.t0 if mon.start is None else mon.start
        if start < src.off_time:
            raise ConfigurationError(
                f"DFT window opens at {start:.3g} s, before the source turns off at {src.off_time:.3g} s"
            )
        for f in mon.frequencies:
            acc = tuple(np.zeros(shape, complex, order="F") for _ in range(3))
            monitors.append((f, start, mon.stride, acc))

    bad = np.zeros(shape[2], dtype=np.bool_)
    idx_, idy_, idz_ = 1 / dx, 1 / dy, 1 / dz
    chx, chy, chz = dt / (MU0 * dx), dt / (MU0 * dy), dt / (MU0 * dz)
    ch = dt / MU0
    ike = [pe[2] for pe in prof_e]
    ikh = [ph[2] for ph in prof_h]

    times = (np.arange(cfg.n_steps) + 1) * dt
    pulse = src.pulse(times)
    src_spec_t = np.arange(cfg.n_steps + 1) * dt
    e_steps, e_vals = [], []
    t_start = time.perf_counter()
    for n in range(cfg.n_steps):
        want_energy = cfg.energy_every and n % cfg.energy_every == 0
        if want_energy:
            h_old = tuple(h.copy() for h in fields_h)
        _update_h(ex, ey, ez, hx, hy, hz, chx, chy, chz, *ikh)
        if p:
            _cpml_h_x(ey, ez, hy, hz, ch, *psi_h[0], *prof_h[0][:2], idx_, p)
            _cpml_h_y(ex, ez, hx, hz, ch, *psi_h[1], *prof_h[1][:2], idy_, p)
            _cpml_h_z(ex, ey, hx, hy, ch, *psi_h[2], *prof_h[2][:2], idz_, p)
        if want_energy:
            e_steps.append(n)
            e_vals.append(energy(eps_e, fields_e, h_old, fields_h, grid.spacing))
        _update_e(ex, ey, ez, hx, hy, hz, cex, cey, cez, idx_, idy_, idz_, *ike, cfg.ceiling, bad)
        if p:
            _cpml_e_x(ey, ez, hy, hz, cey, cez, *psi_e[0], *prof_e[0][:2], idx_, p)
            _cpml_e_y(ex, ez, hx, hz, cex, cez, *psi_e[1], *prof_e[1][:2], idy_, p)
            _cpml_e_z(ex, ey, hx, hy, cex, cey, *psi_e[2], *prof_e[2][:2], idz_, p)
        if bad.any():
            raise StabilityError(f"field exceeded {cfg.ceiling:g} or became non-finite at step {n + 1}", n + 1)
        fields_e[src_comp][src_idx] += pulse[n]
        for key, c, idx in probe_idx:
            traces[key][n] = fields_e[c][idx]
        t = times[n]
        for f, start, stride, acc in monitors:
            if t >= start and n % stride == 0:
                _dft_accumulate(ex, ey, ez, *acc, np.exp(-2j * math.pi * f * t) * dt * stride)
    wall = time.perf_counter() - t_start

    snaps = []
    for f, start, stride, acc in monitors:
        norm = complex(np.sum(src.pulse(src_spec_t) * np.exp(-2j * math.pi * f * src_spec_t)) * dt)
        if norm == 0:
            norm = 1.0
        col = collocate(*(a / norm for a in acc))
        snaps.append(
            FieldSnapshot(*col, np.asarray(grid.eps), grid.spacing, f, grid.origin, {"window_start": start})
        )
    meta = {
        "shape": list(shape),
        "dt": dt,
        "n_steps": cfg.n_steps,
        "source_index": list(src_idx),
        "threads": numba.get_num_threads(),
        "cell_updates_per_second": float(np.prod(shape)) * cfg.n_steps / wall if wall > 0 else math.inf,
    }
    return RunResult(dt, times, traces, snaps, np.asarray(e_steps), np.asarray(e_vals), wall, meta)


def collocate(fx, fy, fz):
    """Average the staggered E components onto the nodes."""
    out = []
    for ax, f in enumerate((fx, fy, fz)):
        g = np.array(f, copy=True)
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[ax] = slice(1, None)
        sl_lo[ax] = slice(0, -1)
        g[tuple(sl_hi)] = 0.5 * (f[tuple(sl_hi)] + f[tuple(sl_lo)])
        first = [slice(None)] * 3
        first[ax] = 0
        g[tuple(first)] = 0.5 * f[tuple(first)]
        out.append(g)
    return out


# --- boundary gauge ----------------------------------------------------------------------


def _vacuum_grid(n: int, d: float) -> DielectricGrid:
    eps = np.ones((n, n, n))
    half = 0.5 * n * d
    return DielectricGrid(eps, (d, d, d), (-half, -half, -half), (eps, eps, eps))


def pml_reflection_test(interior: int = 40, pml: PMLSpec = PMLSpec(8), spacing: float = 1e-8,
                        probe_gap: int = 3) -> float:
    """Peak reflected / peak incident amplitude (dB) at a probe near one wall.

    A z-dipole at the centre radiates along x toward a probe ``probe_gap``
    cells in front of the absorber.  The reference run doubles the interior,
    so its own walls stay out of the comparison window.
    """
    d = spacing
    n_test = interior + 2 * pml.cells
    n_ref = 2 * interior + 2 * pml.cells
    dist = interior // 2 - probe_gap  # source to probe, cells
    wavelength = 12 * d
    f0 = C0 / wavelength
    src = DipoleSource((0.0, 0.0, 0.0), "ez", f0, 1.2 * f0)
    delay = 3 * src.tau
    dt = courant_dt((d, d, d))
    # stop before the reference run's nearest wall echo reaches the probe
    echo = delay + (2 * interior - dist) * d / C0
    steps = int((echo - 0.5 * src.tau) / dt)
    if steps * dt < delay + dist * d / C0 + 2 * src.tau:
        raise ConfigurationError("interior too small for a clean reflection window")

    def trace(n, bnd):
        # place source and probe by index so both grids agree exactly
        g = _vacuum_grid(n, d)
        c = (n // 2, n // 2, n // 2)
        at = component_position(g, c, "ez")
        s = DipoleSource(tuple(at), "ez", f0, 1.2 * f0, delay=delay)
        probe = ProbeSpec(tuple(component_position(g, (c[0] + dist, c[1], c[2]), "ez")), ("ez",), "p")
        cfg = SimulationConfig(g, steps, s, bnd, (probe,), dt=dt)
        return run(cfg).probes["p"]

    ref = trace(n_ref, pml if pml.cells else PMLSpec(8))
    test = trace(n_test, pml)
    inc = np.max(np.abs(ref))
    refl = np.max(np.abs(test - ref))
    return 20 * math.log10(max(refl, 1e-300) / inc)
