"""Woodpile crystal geometry: parametric specs, cuboid scenes and voxelization.

Lengths are in metres throughout.  The finite crystal is laid out in the
woodpile frame (X_w, Y_w, Z_w) with the defect centre at the origin; layers
are stacked along z and the middle layer holds rods along x.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ResourceError

SQRT2 = math.sqrt(2.0)
DEFAULT_MEMORY_CAP = 2 * 1024**3


class LatticeClass(enum.Enum):
    BCC = "BCC"
    FCC = "FCC"
    CENTERED_TETRAGONAL = "CenteredTetragonal"


def classify_lattice(c_over_a: float, tol: float = 1e-9) -> LatticeClass:
    """Bravais lattice of a woodpile with stacking/pitch ratio ``c_over_a``."""
    if not c_over_a > 0:
        raise DomainError(f"c/a must be positive, got {c_over_a!r}")
    if abs(c_over_a - 1.0) <= tol:
        return LatticeClass.BCC
    if abs(c_over_a - SQRT2) <= tol * SQRT2:
        return LatticeClass.FCC
    return LatticeClass.CENTERED_TETRAGONAL


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------

DEFECT_PRESETS = {
    "D0": (0.25, 0.25, 0.5),
    "D1": (0.5, 0.5, 0.25),
    "D2": (0.5, 0.5, 0.5),
}

BUFFER_PRESETS = ("A0", "A1", "A2")


@dataclass(frozen=True)
class DefectSpec:
    size: tuple[float, float, float]
    name: str = "custom"

    def __post_init__(self):
        if len(self.size) != 3 or not all(s > 0 for s in self.size):
            raise DomainError(f"defect size must be three positive lengths, got {self.size}")

    @classmethod
    def preset(cls, name: str, c: float) -> "DefectSpec":
        try:
            fx, fy, fz = DEFECT_PRESETS[name]
        except KeyError:
            raise ConfigurationError(f"unknown defect preset {name!r}") from None
        return cls((fx * c, fy * c, fz * c), name)


@dataclass(frozen=True)
class BufferSpec:
    size: tuple[float, float, float]
    name: str = "custom"

    def __post_init__(self):
        if len(self.size) != 3 or not all(s > 0 for s in self.size):
            raise DomainError(f"buffer size must be three positive lengths, got {self.size}")

    @classmethod
    def preset(cls, name: str, a: float, w: float, c: float) -> "BufferSpec":
        lateral = {"A0": a - 0.5 * w, "A1": a, "A2": a + 0.5 * w}
        if name not in lateral:
            raise ConfigurationError(f"unknown air-buffer preset {name!r}")
        b = lateral[name]
        return cls((b, b, 0.25 * c), name)


@dataclass(frozen=True)
class WoodpileSpec:
    """Parametric woodpile crystal.

    ``n_rods`` is the base rod count per layer; each rod family gets either
    ``n_rods`` or ``n_rods + 1`` rods so that the finite crystal is mirror
    symmetric about the defect (see :func:`rods_in_layer`).
    """

    c: float
    a: float
    w: float
    h: float
    n_layers: int = 37
    n_rods: int = 13
    n_wp: float = 3.3
    n_def: float = 3.3
    n_bf: float = 1.0
    defect: DefectSpec | None = None
    buffer: BufferSpec | None = None
    defect_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("c", "a", "w", "h"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.w < self.a:
            raise DomainError("rod width must be smaller than the in-layer pitch")
        if self.n_layers < 1 or self.n_rods < 1:
            raise DomainError("need at least one layer and one rod per layer")
        if min(self.n_wp, self.n_def, self.n_bf) < 1.0:
            raise DomainError("refractive indices must be >= 1")
        if self.buffer is not None and self.defect is not None:
            if any(b < d for b, d in zip(self.buffer.size, self.defect.size)):
                raise DomainError("air buffer must enclose the defect")

    @classmethod
    def fcc(
        cls,
        c: float,
        w_over_c: float = 0.2145,
        defect: str | None = None,
        buffer: str | None = None,
        **kwargs,
    ) -> "WoodpileSpec":
        """FCC woodpile (c/a = sqrt 2, h = c/4) with optional named presets."""
        a = c / SQRT2
        w = w_over_c * c
        d = DefectSpec.preset(defect, c) if defect else None
        b = BufferSpec.preset(buffer, a, w, c) if buffer else None
        if b is not None and d is None:
            d = DefectSpec.preset("D1", c)
        return cls(c=c, a=a, w=w, h=0.25 * c, defect=d, buffer=b, **kwargs)

    @property
    def lattice(self) -> LatticeClass:
        return classify_lattice(self.c / self.a)

    @property
    def middle_layer(self) -> int:
        return (self.n_layers - 1) // 2

    def scaled(self, s: float) -> "WoodpileSpec":
        """Copy with every length multiplied by ``s``."""
        d = replace(self.defect, size=tuple(s * v for v in self.defect.size)) if self.defect else None
        b = replace(self.buffer, size=tuple(s * v for v in self.buffer.size)) if self.buffer else None
        return replace(
            self, c=s * self.c, a=s * self.a, w=s * self.w, h=s * self.h, defect=d, buffer=b,
            defect_offset=(s * self.defect_offset[0], s * self.defect_offset[1]),
        )


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cuboid:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    index: float
    priority: int = 0
    label: str = ""

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((p >= lo) & (p <= hi), axis=-1)


# rendering order; later wins
PRIORITY_BACKGROUND, PRIORITY_ROD, PRIORITY_BUFFER, PRIORITY_DEFECT = 0, 1, 2, 3


@dataclass(frozen=True)
class Scene:
    cuboids: tuple[Cuboid, ...]
    background: float = 1.0
    period: float = 1.0
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]] = ((0, 0, 0), (0, 0, 0))

    def ordered(self) -> list[Cuboid]:
        # stable sort keeps insertion order inside one priority class
        return sorted(self.cuboids, key=lambda cb: cb.priority)

    def index_at(self, points) -> np.ndarray:
        """Refractive index at each point of an (..., 3) array."""
        p = np.asarray(points, dtype=float)
        out = np.full(p.shape[:-1], self.background, dtype=float)
        for cb in self.ordered():
            out[cb.contains(p)] = cb.index
        return out

    def find(self, label: str) -> Cuboid | None:
        for cb in self.cuboids:
            if cb.label == label:
                return cb
        return None

    def to_dict(self) -> dict:
        return {
            "background": self.background,
            "period": self.period,
            "bounds": [list(self.bounds[0]), list(self.bounds[1])],
            "cuboids": [
                {"label": cb.label, "min": list(cb.lo), "max": list(cb.hi),
                 "index": cb.index, "priority": cb.priority}
                for cb in self.cuboids
            ],
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def read(cls, path) -> "Scene":
        d = json.loads(Path(path).read_text())
        cubs = tuple(
            Cuboid(tuple(c["min"]), tuple(c["max"]), c["index"], c["priority"], c["label"])
            for c in d["cuboids"]
        )
        return cls(cubs, d["background"], d["period"], (tuple(d["bounds"][0]), tuple(d["bounds"][1])))


def rods_in_layer(spec: WoodpileSpec, layer: int) -> tuple[str, np.ndarray]:
    """Rod axis ('x' or 'y') and lateral rod-centre positions for ``layer``.

    Positions are measured from the defect centre.  The middle layer holds
    x-rods on half-integer multiples of ``a`` so the defect sits between two
    of them; the layer above holds y-rods on integer multiples so one of them
    runs over the defect.  Each family receives whichever of ``n_rods`` and
    ``n_rods + 1`` has the parity that keeps the set symmetric about zero.
    """
    rel = layer - spec.middle_layer
    axis = "x" if rel % 2 == 0 else "y"
    half_integer = rel % 4 in (0, 3)
    n = spec.n_rods
    # integer sites need an odd count, half-integer sites an even one
    if half_integer:
        count = n if n % 2 == 0 else n + 1
    else:
        count = n if n % 2 == 1 else n + 1
    pos = (np.arange(count) - (count - 1) / 2.0) * spec.a
    return axis, pos


def _lateral_half_extent(spec: WoodpileSpec) -> float:
    return 0.5 * (spec.n_rods + 1) * spec.a


def build_scene(spec: WoodpileSpec) -> Scene:
    """Cuboid scene for a finite woodpile with optional buffer and defect."""
    if (spec.defect or spec.buffer) and spec.n_layers < 3:
        raise ConfigurationError("a defect needs at least 3 layers (no middle layer otherwise)")
    L = _lateral_half_extent(spec)
    m = spec.middle_layer
    hw = 0.5 * spec.w
    cubs: list[Cuboid] = []
    pitch = 0.25 * spec.c
    for layer in range(spec.n_layers):
        zc = (layer - m) * pitch
        z0, z1 = zc - 0.5 * spec.h, zc + 0.5 * spec.h
        axis, pos = rods_in_layer(spec, layer)
        for k, p in enumerate(pos):
            if axis == "x":
                lo, hi = (-L, p - hw, z0), (L, p + hw, z1)
            else:
                lo, hi = (p - hw, -L, z0), (p + hw, L, z1)
            cubs.append(Cuboid(lo, hi, spec.n_wp, PRIORITY_ROD, f"rod{layer}_{k}"))
    ox, oy = spec.defect_offset
    centre = np.array([ox, oy, 0.0])
    if spec.buffer is not None:
        half = 0.5 * np.asarray(spec.buffer.size)
        cubs.append(Cuboid(tuple(centre - half), tuple(centre + half), spec.n_bf,
                           PRIORITY_BUFFER, "buffer"))
    if spec.defect is not None:
        half = 0.5 * np.asarray(spec.defect.size)
        cubs.append(Cuboid(tuple(centre - half), tuple(centre + half), spec.n_def,
                           PRIORITY_DEFECT, "defect"))
    zlo = -m * pitch - 0.5 * spec.h
    zhi = (spec.n_layers - 1 - m) * pitch + 0.5 * spec.h
    bounds = ((-L, -L, zlo), (L, L, zhi))
    return Scene(tuple(cubs), spec.n_bf, spec.a, bounds)


def bulk_index(spec: WoodpileSpec, points) -> np.ndarray:
    """Index of the infinite defect-free woodpile, from the stacking rule alone.

    Uses the same frame as :func:`build_scene` (middle layer centred on
    z = 0), so it agrees with a large finite scene away from its surface.
    """
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    a, hw = spec.a, 0.5 * spec.w
    pitch = 0.25 * spec.c
    rel = np.floor(z / pitch + 0.5).astype(np.int64)
    in_slot = np.abs(z - rel * pitch) <= 0.5 * spec.h
    phase = np.mod(rel, 4)
    along_x = phase % 2 == 0
    # half-integer families: rel % 4 in {0, 3}
    shift = np.where((phase == 0) | (phase == 3), 0.5 * a, 0.0)
    lateral = np.where(along_x, y, x) - shift
    d = np.abs(lateral - a * np.round(lateral / a))
    out = np.full(p.shape[:-1], spec.n_bf, dtype=float)
    out[(d <= hw) & in_slot] = spec.n_wp
    return out


# ---------------------------------------------------------------------------
# Voxelization
# ---------------------------------------------------------------------------


@dataclass
class DielectricGrid:
    """Relative permittivity on a uniform grid.

    ``eps[i, j, k]`` belongs to the cell centred at
    ``origin + (i + 0.5, j + 0.5, k + 0.5) * spacing``.  When built for FDTD,
    ``eps_yee`` carries the permittivity sampled at the three Yee E-edge
    locations (see :mod:`woodpile.fdtd`).
    """

    eps: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    eps_yee: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.eps.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def cell_centres(self, axis: int) -> np.ndarray:
        n = self.eps.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing[axis]

    def index_of(self, point) -> tuple[int, int, int]:
        """Cell containing ``point``."""
        ijk = np.floor((np.asarray(point) - np.asarray(self.origin)) / np.asarray(self.spacing))
        return tuple(int(v) for v in np.clip(ijk, 0, np.asarray(self.shape) - 1))

    def header(self) -> dict:
        return {
            "dims": list(self.shape),
            "spacing": list(self.spacing),
            "origin": list(self.origin),
            "dtype": "<f8",
            "order": "x-fastest",
            **self.meta,
        }

    def write(self, path) -> None:
        write_array(path, self.eps, self.header())

    @classmethod
    def read(cls, path) -> "DielectricGrid":
        arr, hdr = read_array(path)
        return cls(arr, tuple(hdr["spacing"]), tuple(hdr["origin"]))


def write_array(path, arr: np.ndarray, header: dict) -> None:
    """Flat little-endian binary (x fastest) plus a JSON sidecar ``<path>.json``.

    Complex arrays are stored as interleaved (re, im) float64 pairs.
    """
    path = Path(path)
    hdr = dict(header)
    hdr["dims"] = list(arr.shape)
    if np.iscomplexobj(arr):
        hdr["dtype"] = "<c16"
        hdr["layout"] = "complex pairs (re, im)"
        data = np.asarray(arr, dtype="<c16")
    else:
        hdr["dtype"] = "<f8"
        data = np.asarray(arr, dtype="<f8")
    # Fortran order makes the first (x) index fastest
    path.write_bytes(data.tobytes(order="F"))
    Path(str(path) + ".json").write_text(json.dumps(hdr, indent=1))


def read_array(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    hdr = json.loads(Path(str(path) + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype=hdr["dtype"])
    return raw.reshape(hdr["dims"], order="F").copy(), hdr


def _axis_overlap(edges: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fraction of each 1-D cell [edges[i], edges[i+1]] covered by [lo, hi]."""
    left = np.maximum(edges[:-1], lo)
    right = np.minimum(edges[1:], hi)
    return np.clip(right - left, 0.0, None) / np.diff(edges)


def sample_permittivity(
    scene: Scene,
    shape: Sequence[int],
    spacing: Sequence[float],
    origin: Sequence[float],
    offset: Sequence[float] = (0.5, 0.5, 0.5),
    subpixel: bool = False,
) -> np.ndarray:
    """Relative permittivity sampled at ``origin + (idx + offset) * spacing``.

    Point sampling assigns each cuboid to the index box of sample points it
    contains (closed faces).  With ``subpixel`` each sample is instead the
    volume-fraction average over a cell of size ``spacing`` centred on it,
    blended cuboid by cuboid in priority order.
    """
    shape = tuple(int(n) for n in shape)
    sp = np.asarray(spacing, dtype=float)
    org = np.asarray(origin, dtype=float)
    off = np.asarray(offset, dtype=float)
    eps = np.full(shape, scene.background**2, dtype=float)
    for cb in scene.ordered():
        val = cb.index**2
        if not subpixel:
            sl = []
            for ax in range(3):
                # sample i sits at org + (i + off) * sp; closed interval test
                lo = math.ceil((cb.lo[ax] - org[ax]) / sp[ax] - off[ax] - 1e-9)
                hi = math.floor((cb.hi[ax] - org[ax]) / sp[ax] - off[ax] + 1e-9)
                lo, hi = max(lo, 0), min(hi, shape[ax] - 1)
                if hi < lo:
                    break
                sl.append(slice(lo, hi + 1))
            else:
                eps[tuple(sl)] = val
            continue
        fr = []
        sl = []
        for ax in range(3):
            centres = org[ax] + (np.arange(shape[ax]) + off[ax]) * sp[ax]
            edges = np.append(centres - 0.5 * sp[ax], centres[-1] + 0.5 * sp[ax])
            f = _axis_overlap(edges, cb.lo[ax], cb.hi[ax])
            nz = np.nonzero(f)[0]
            if nz.size == 0:
                break
            sl.append(slice(nz[0], nz[-1] + 1))
            fr.append(f[nz[0]:nz[-1] + 1])
        else:
            frac = fr[0][:, None, None] * fr[1][None, :, None] * fr[2][None, None, :]
            region = eps[tuple(sl)]
            eps[tuple(sl)] = region * (1.0 - frac) + val * frac
    return eps


def grid_layout(
    scene: Scene,
    resolution: Sequence[float],
    padding: float = 0.0,
    align: Sequence[float] = (0.0, 0.0, 0.0),
) -> tuple[tuple[int, int, int], tuple[float, float, float], tuple[float, float, float]]:
    """Shape, spacing and origin of a grid covering ``scene.bounds`` + padding.

    ``resolution`` is cells per ``scene.period`` along each axis.  The grid
    is positioned so that ``align`` (default: the defect centre) falls on a
    cell centre.
    """
    res = np.broadcast_to(np.asarray(resolution, dtype=float), (3,))
    if np.any(res <= 0):
        raise DomainError("resolution must be positive")
    sp = scene.period / res
    lo = np.asarray(scene.bounds[0]) - padding
    hi = np.asarray(scene.bounds[1]) + padding
    al = np.asarray(align, dtype=float)
    n_lo = np.ceil((al - lo) / sp - 0.5)
    n_hi = np.ceil((hi - al) / sp - 0.5)
    origin = al - (n_lo + 0.5) * sp
    shape = (n_lo + n_hi + 1).astype(int)
    return tuple(int(v) for v in shape), tuple(float(v) for v in sp), tuple(float(v) for v in origin)


def voxelize(
    scene: Scene,
    resolution,
    padding: float = 0.0,
    subpixel: bool = False,
    yee: bool = False,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    align=(0.0, 0.0, 0.0),
) -> DielectricGrid:
    """Voxelize a scene on a uniform grid.

    ``padding`` (a length) extends the grid beyond the scene bounds on every
    side, e.g. to leave room for absorbing layers.  With ``yee`` the three
    E-edge permittivity arrays needed by the FDTD kernel are sampled as well.
    ``align`` is put on a cell centre.
    """
    shape, spacing, origin = grid_layout(scene, resolution, padding, align)
    n_arrays = 4 if yee else 1
    need = int(np.prod(shape)) * 8 * n_arrays
    if need > memory_cap:
        raise ResourceError(
            f"grid {shape} needs {need / 2**20:.1f} MiB, cap is {memory_cap / 2**20:.1f} MiB",
            required_bytes=need,
        )
    eps = sample_permittivity(scene, shape, spacing, origin, (0.5, 0.5, 0.5), subpixel)
    eps_yee = None
    if yee:
        eps_yee = tuple(
            sample_permittivity(scene, shape, spacing, origin, off, subpixel)
            for off in yee_offsets()
        )
    return DielectricGrid(eps, spacing, origin, eps_yee, {"subpixel": subpixel})


def yee_offsets():
    """Fractional positions of Ex, Ey, Ez inside a cell (origin at the corner).

    E components live on the edges through the cell centre line, shifted so
    that Ex[i, j, k] sits at (i + 1/2, j, k) etc. relative to the node
    lattice.  Nodes here are the cell centres of the dielectric grid, which
    puts the defect centre on an Ex/Ey/Ez node triple.
    """
    return ((1.0, 0.5, 0.5), (0.5, 1.0, 0.5), (0.5, 0.5, 1.0))


# ---------------------------------------------------------------------------
# Analytic volumes (test oracle support)
# ---------------------------------------------------------------------------


def _intersect(a, b):
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    if np.any(hi <= lo):
        return None
    return lo, hi


def union_volume(boxes: Iterable[tuple[Sequence[float], Sequence[float]]]) -> float:
    """Exact volume of a union of axis-aligned boxes by inclusion-exclusion.

    Only non-empty intersections are expanded, which keeps this cheap for
    scenes where few boxes overlap.
    """
    bx = [(np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in boxes]
    n = len(bx)
    total = 0.0

    def expand(start, box, sign):
        nonlocal total
        for j in range(start, n):
            inter = _intersect(box, bx[j])
            if inter is None:
                continue
            total += sign * float(np.prod(inter[1] - inter[0]))
            expand(j + 1, inter, -sign)

    for i in range(n):
        total += float(np.prod(bx[i][1] - bx[i][0]))
        expand(i + 1, bx[i], -1.0)
    return total


def high_index_volume(scene: Scene) -> float:
    """Volume where the index exceeds the background, from the cuboid list."""
    rods = [(cb.lo, cb.hi) for cb in scene.cuboids if cb.priority == PRIORITY_ROD]
    buf = scene.find("buffer")
    dfc = scene.find("defect")
    if buf is None:
        boxes = rods + ([(dfc.lo, dfc.hi)] if dfc else [])
        return union_volume(boxes)
    # rods minus buffer, plus the defect (which lies inside the buffer)
    carved = union_volume(rods + [(buf.lo, buf.hi)]) - buf.volume
    return carved + (dfc.volume if dfc else 0.0)


# ---------------------------------------------------------------------------
# Primitive cell of the bulk crystal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitCell:
    """Primitive cell of the infinite woodpile.

    ``vectors`` rows are the primitive lattice vectors.  The basis holds one
    x-rod segment and one y-rod segment, each of length ``a`` along its axis,
    which tile the crystal under lattice translations.
    """

    vectors: np.ndarray
    basis: tuple[Cuboid, ...]
    n_rod: float
    n_bg: float
    a: float
    c: float

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.vectors)))

    @property
    def reciprocal(self) -> np.ndarray:
        """Rows b_i with a_i . b_j = 2 pi delta_ij."""
        return 2.0 * np.pi * np.linalg.inv(self.vectors).T

    def index_at(self, points) -> np.ndarray:
        """Index at arbitrary points by folding into the cell."""
        p = np.asarray(points, dtype=float)
        flat = p.reshape(-1, 3)
        frac = flat @ np.linalg.inv(self.vectors)
        frac -= np.floor(frac)
        folded = frac @ self.vectors
        out = np.full(flat.shape[0], self.n_bg)
        for shift in itertools.product((-1, 0, 1), repeat=3):
            q = folded + np.asarray(shift, float) @ self.vectors
            for cb in self.basis:
                out[cb.contains(q)] = cb.index
        return out.reshape(p.shape[:-1])

    def sample(self, n: int | Sequence[int], supersample: int = 1, inverse: bool = False) -> np.ndarray:
        """Permittivity (or its inverse) on an n1 x n2 x n3 grid of fractional coordinates.

        Each value is the average over ``supersample**3`` sub-points spread
        across the grid cell, which tames staircasing in Fourier space.
        """
        ns = np.broadcast_to(np.asarray(n, dtype=int), (3,))
        s = supersample
        sub = (np.arange(s) + 0.5) / s - 0.5
        acc = np.zeros(tuple(ns))
        axes = [np.arange(k) / k for k in ns]
        for d in itertools.product(sub, repeat=3):
            f = np.stack(
                np.meshgrid(*(ax + d[i] / ns[i] for i, ax in enumerate(axes)), indexing="ij"),
                axis=-1,
            )
            eps = self.index_at(f @ self.vectors) ** 2
            acc += 1.0 / eps if inverse else eps
        return acc / s**3


def primitive_cell(spec: WoodpileSpec) -> UnitCell:
    """Primitive vectors (a,0,0), (0,a,0), (a/2,a/2,c/2) and the two-rod basis."""
    if spec.defect is not None or spec.buffer is not None:
        raise ConfigurationError("primitive cell is only defined for the defect-free crystal")
    a, c, h, hw = spec.a, spec.c, spec.h, 0.5 * spec.w
    p = 0.25 * c
    vectors = np.array([[a, 0.0, 0.0], [0.0, a, 0.0], [0.5 * a, 0.5 * a, 0.5 * c]])
    # same frame as bulk_index: layer rel=0 is centred on z = 0 with x-rods at y = a/2
    xrod = Cuboid((0.0, 0.5 * a - hw, -0.5 * h), (a, 0.5 * a + hw, 0.5 * h), spec.n_wp, 1, "xrod")
    yrod = Cuboid((-hw, 0.0, p - 0.5 * h), (hw, a, p + 0.5 * h), spec.n_wp, 1, "yrod")
    return UnitCell(vectors, (xrod, yrod), spec.n_wp, spec.n_bf, a, c)
