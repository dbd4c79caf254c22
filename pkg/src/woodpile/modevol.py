"""Effective mode volume from single-frequency field snapshots."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cqed import normalized_volume
from .errors import DomainError
from .geometry import read_array, write_array

__all__ = [
    "FieldSnapshot",
    "ModeVolume",
    "energy_density",
    "mode_volume",
    "mode_volume_at",
    "normalized_volume",
    "line_cut",
    "write_line_cut",
    "report",
]


@dataclass(frozen=True)
class FieldSnapshot:
    """Complex E at the cell centres of ``eps`` (all four arrays share a shape)."""

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    eps: np.ndarray
    spacing: tuple[float, float, float]
    frequency: float = 0.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {np.shape(a) for a in (self.ex, self.ey, self.ez, self.eps)}
        if len(shapes) != 1:
            raise DomainError(f"snapshot arrays disagree in shape: {sorted(shapes)}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise DomainError("spacing must be three positive lengths")

    @property
    def shape(self):
        return np.shape(self.eps)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def position(self, index) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(index) + 0.5) * np.asarray(self.spacing)

    def index_of(self, point) -> tuple[int, int, int]:
        ijk = np.floor((np.asarray(point) - np.asarray(self.origin)) / np.asarray(self.spacing))
        if np.any(ijk < 0) or np.any(ijk >= np.asarray(self.shape)):
            raise DomainError(f"point {tuple(point)} lies outside the snapshot")
        return tuple(int(v) for v in ijk)

    def write(self, stem) -> None:
        """``<stem>_ex.bin`` ... ``<stem>_eps.bin``, each with a JSON header."""
        hdr = {
            "spacing": list(self.spacing),
            "origin": list(self.origin),
            "frequency": self.frequency,
            **self.meta,
        }
        for name in ("ex", "ey", "ez", "eps"):
            write_array(f"{stem}_{name}.bin", np.asarray(getattr(self, name)), hdr)

    @classmethod
    def read(cls, stem) -> "FieldSnapshot":
        arrs = {}
        for name in ("ex", "ey", "ez", "eps"):
            arrs[name], hdr = read_array(f"{stem}_{name}.bin")
        known = {"spacing", "origin", "frequency", "dims", "dtype", "order"}
        meta = {k: v for k, v in hdr.items() if k not in known}
        return cls(
            spacing=tuple(hdr["spacing"]),
            origin=tuple(hdr["origin"]),
            frequency=float(hdr["frequency"]),
            meta=meta,
            **arrs,
        )


@dataclass(frozen=True)
class ModeVolume:
    V_eff: float
    argmax: tuple[int, int, int]
    position: tuple[float, float, float]
    u_max: float


def energy_density(snap: FieldSnapshot) -> np.ndarray:
    """eps_r * |E|^2 per cell."""
    return np.asarray(snap.eps) * (
        np.abs(snap.ex) ** 2 + np.abs(snap.ey) ** 2 + np.abs(snap.ez) ** 2
    )


def mode_volume(snap: FieldSnapshot) -> ModeVolume:
    """Integral of u over the grid divided by the largest cell value of u."""
    u = energy_density(snap)
    idx = np.unravel_index(int(np.argmax(u)), u.shape)
    u_max = float(u[idx])
    if not u_max > 0:
        raise DomainError("mode volume undefined for an all-zero field")
    V = float(u.sum(dtype=np.float64)) * snap.cell_volume / u_max
    idx = tuple(int(i) for i in idx)
    return ModeVolume(V, idx, tuple(float(p) for p in snap.position(idx)), u_max)


def mode_volume_at(snap: FieldSnapshot, point) -> float:
    """Variant normalised by u at an emitter position instead of the peak."""
    u = energy_density(snap)
    u0 = float(u[snap.index_of(point)])
    if not u0 > 0:
        raise DomainError("field vanishes at the emitter position")
    return float(u.sum(dtype=np.float64)) * snap.cell_volume / u0


def line_cut(snap: FieldSnapshot, axis: int, through=None) -> tuple[np.ndarray, np.ndarray]:
    """u / u_max along ``axis`` through ``through`` (default: the peak cell)."""
    u = energy_density(snap)
    u_max = u.max()
    if not u_max > 0:
        raise DomainError("empty field")
    idx = list(mode_volume(snap).argmax if through is None else snap.index_of(through))
    idx[axis] = slice(None)
    n = u.shape[axis]
    coords = snap.origin[axis] + (np.arange(n) + 0.5) * snap.spacing[axis]
    return coords, u[tuple(idx)] / u_max


def write_line_cut(path, snap: FieldSnapshot, axis: int, through=None, period: float | None = None):
    coords, val = line_cut(snap, axis, through)
    name = "xyz"[axis]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{name}_m"] + ([f"{name}_over_period"] if period else []) + ["u_norm"])
        for x, v in zip(coords, val):
            w.writerow([repr(float(x))] + ([f"{x / period:.6f}"] if period else []) + [repr(float(v))])


def report(snap: FieldSnapshot, wavelength: float, n_def: float) -> dict:
    mv = mode_volume(snap)
    return {
        "V_eff_um3": mv.V_eff * 1e18,
        "V_n": normalized_volume(mv.V_eff, wavelength, n_def),
        "lambda_nm": wavelength * 1e9,
        "n_def": n_def,
        "argmax_index": list(mv.argmax),
        "argmax_position_nm": [p * 1e9 for p in mv.position],
    }


def write_report(path, rep: dict) -> None:
    Path(path).write_text(json.dumps(rep, indent=2) + "\n")
