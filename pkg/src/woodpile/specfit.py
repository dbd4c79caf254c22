"""Resonance extraction from ringdown signals.

Two estimators: a windowed FFT with a half-power width, good for low and
moderate Q, and harmonic inversion (matrix pencil on a demodulated,
decimated copy of the signal), which reaches Q far beyond the record's
Fourier resolution.

Mode model: ``x(t) = sum_k a_k exp(i 2 pi f_k t - gamma_k t)``.  For real
signals only the f >= 0 image is reported, so a cosine of amplitude A shows
up with |a| = A/2 while a DC offset keeps its full value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg, signal as sps
from scipy.constants import c as C0

from .errors import DomainError, NumericError, ResolutionError

MIN_SAMPLES = 64
MAX_TAPS = 4001


@dataclass(frozen=True)
class RingdownSignal:
    samples: np.ndarray
    dt: float
    band: tuple[float, float] | None = None

    def __post_init__(self):
        x = np.asarray(self.samples)
        if x.ndim != 1 or x.size < MIN_SAMPLES:
            raise DomainError(f"ringdown needs at least {MIN_SAMPLES} samples, got {x.size}")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.band is not None:
            lo, hi = self.band
            if not 0 <= lo < hi:
                raise DomainError(f"bad analysis band {self.band}")
        object.__setattr__(self, "samples", x)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    @property
    def duration(self) -> float:
        return self.samples.size * self.dt


@dataclass(frozen=True)
class ModeEstimate:
    frequency: float
    decay: float
    amplitude: complex
    error: float = 0.0

    @property
    def Q(self) -> float:
        if self.decay == 0:
            return math.inf
        return math.pi * self.frequency / self.decay

    @property
    def growing(self) -> bool:
        return self.decay < 0

    def reduced(self, period: float) -> float:
        """Frequency in units of c0/period."""
        return period * self.frequency / C0

    def wavelength(self) -> float:
        return C0 / self.frequency if self.frequency > 0 else math.inf


class Spectrum(NamedTuple):
    frequency: np.ndarray
    magnitude: np.ndarray

    def reduced(self, period: float) -> np.ndarray:
        return period * self.frequency / C0


def _window(name: str, n: int) -> np.ndarray:
    if name in ("rect", "none", "boxcar"):
        return np.ones(n)
    if name == "hann":
        return np.hanning(n)
    try:
        return sps.get_window(name, n, fftbins=False)
    except ValueError as exc:
        raise DomainError(f"unknown window {name!r}") from exc


def fft_spectrum(sig: RingdownSignal, window: str = "hann", pad: int = 1) -> Spectrum:
    """One-sided magnitude spectrum, amplitude-calibrated for the window."""
    x = sig.samples
    w = _window(window, x.size)
    n_fft = int(pad) * x.size
    if n_fft < x.size:
        raise DomainError("pad must be >= 1")
    mag = np.abs(np.fft.rfft(x * w, n_fft)) * 2 / w.sum()
    return Spectrum(np.fft.rfftfreq(n_fft, sig.dt), mag)


def _in_band(f, band):
    if band is None:
        return np.ones(f.shape, bool)
    return (f >= band[0]) & (f <= band[1])


def q_from_peak(spec: Spectrum, peak: float | None = None, band=None, prominence: float = 100.0):
    """Q = f/FWHM of the power peak nearest ``peak`` (or the tallest in band).

    Returns ``(f_peak, Q)``.  The peak position comes from a parabola through
    the log power of the top three bins; the half-power points are linearly
    interpolated.  A peak must stand ``prominence`` times above the median
    power and span three or more bins above half power.
    """
    f, p = spec.frequency, np.asarray(spec.magnitude, float) ** 2
    mask = _in_band(f, band)
    if p[mask].max(initial=0.0) <= 0:
        raise ResolutionError("no spectral peak: signal is empty in band")
    cand = np.flatnonzero(mask)
    cand = cand[(cand > 0) & (cand < f.size - 1)]
    local = cand[(p[cand] >= p[cand - 1]) & (p[cand] >= p[cand + 1])]
    if local.size == 0:
        raise ResolutionError("no local maximum in band")
    if peak is None:
        i = local[np.argmax(p[local])]
    else:
        i = local[np.argmin(np.abs(f[local] - peak))]
    floor = np.median(p[mask])
    if p[i] < prominence * floor:
        raise ResolutionError("no isolated peak above the noise floor; try harmonic inversion")

    half = p[i] / 2
    lo = i
    while lo > 0 and p[lo - 1] > half:
        lo -= 1
    hi = i
    while hi < p.size - 1 and p[hi + 1] > half:
        hi += 1
    if hi - lo + 1 < 3 or lo == 0 or hi == p.size - 1:
        raise ResolutionError(
            f"peak at {f[i]:.6g} spans {hi - lo + 1} bins above half power; "
            "linewidth is below the FFT resolution, use harmonic inversion"
        )

    ym, y0, yp = np.log(p[i - 1 : i + 2])
    denom = ym - 2 * y0 + yp
    shift = 0.5 * (ym - yp) / denom if denom < 0 else 0.0
    df = f[1] - f[0]
    f_peak = f[i] + shift * df
    log_half = y0 - 0.25 * (ym - yp) * shift - math.log(2)

    def crossing(j_in, j_out):
        a, b = math.log(p[j_in]), math.log(p[j_out])
        return f[j_in] + (f[j_out] - f[j_in]) * (a - log_half) / (a - b)

    fwhm = crossing(hi, hi + 1) - crossing(lo, lo - 1)
    return f_peak, f_peak / fwhm


# --- harmonic inversion ------------------------------------------------------


def _auto_band(x, dt, floor_db=-80.0):
    # Hann keeps the leakage of undecayed modes from spanning the whole axis
    p = np.abs(np.fft.rfft(x * np.hanning(x.size))) ** 2
    f = np.fft.rfftfreq(x.size, dt)
    if p.max() == 0:
        return 0.0, f[-1]
    idx = np.flatnonzero(p >= p.max() * 10 ** (floor_db / 10))
    lo, hi = f[idx[0]], f[idx[-1]]
    pad = 0.1 * (hi - lo) + 2 / (x.size * dt)
    return max(0.0, lo - pad), min(f[-1], hi + pad)


def _pencil_poles(y, order_cap, L, rtol):
    n = y.size
    H = linalg.hankel(y[: n - L], y[n - L - 1 :])
    _, s, vh = linalg.svd(H, full_matrices=False, check_finite=False)
    if s[0] == 0:
        return np.empty(0, complex)
    k = int(min(order_cap, np.count_nonzero(s > rtol * s[0]), L - 1))
    v = vh[:k].T  # rows of H are spanned by z**j, not its conjugate
    return linalg.eigvals(linalg.lstsq(v[:-1], v[1:])[0])


@dataclass(frozen=True)
class _Prepared:
    y: np.ndarray  # complex series handed to the pencil
    step: float  # time between its samples
    t0: float  # time of its first sample
    f_shift: float  # demodulation frequency
    taps: np.ndarray | None  # low-pass applied before decimation
    dt: float


def _prepare(x, dt, band, max_samples):
    lo, hi = band
    fs = 1 / dt
    if hi >= 0.5 * fs * 0.999 and lo <= 0:
        y = np.asarray(x)
        return _Prepared(y[:max_samples], dt, 0.0, 0.0, None, dt)
    fc = 0.5 * (lo + hi)
    # the filter only has to isolate the band; keep its length bounded
    half = max(0.5 * (hi - lo), 10 * fs / (0.5 * MAX_TAPS))
    t = np.arange(x.size) * dt
    y = x * np.exp(-2j * math.pi * fc * t)
    stop = 1.6 * half + 2 / (x.size * dt)
    decim = max(1, int(fs / (2.2 * stop)))
    ntaps = int(min(x.size // 4, max(63, 10 * fs / (0.5 * half + 1 / (x.size * dt))))) | 1
    decim = max(1, min(decim, (x.size - ntaps) // 128))
    taps = sps.firwin(ntaps, 1.3 * half, window=("kaiser", 10.0), fs=fs)
    y = sps.oaconvolve(y, taps)[ntaps - 1 : x.size : decim]
    if y.size > max_samples:
        y = y[:max_samples]
    return _Prepared(y, decim * dt, (ntaps - 1) * dt, fc, taps, dt)


def harmonic_inversion(
    sig: RingdownSignal,
    max_modes: int = 20,
    band: tuple[float, float] | None = None,
    min_amplitude: float = 1e-4,
    max_error: float = 1e-2,
    rtol: float = 1e-9,
    max_samples: int = 6000,
    pencil: int = 600,
) -> list[ModeEstimate]:
    """Fit damped complex exponentials to ``sig`` inside ``band``.

    Poles come from a total-least-squares matrix pencil.  Each mode's
    ``error`` is the relative change of its complex frequency between two
    pencil sizes.  Modes below ``min_amplitude`` times the largest one or
    above ``max_error`` are dropped; growing modes are kept (negative Q).
    """
    x = sig.samples
    band = band or sig.band or _auto_band(x, sig.dt)
    if not np.any(x):
        return []
    prep = _prepare(x, sig.dt, band, max_samples)
    y = prep.y
    m = y.size
    if m < 8:
        raise DomainError("too few samples survive decimation; widen the band or lengthen the record")
    L1 = max(3, min(m // 3, pencil))
    L2 = max(3, (2 * L1) // 3)
    cap = max(1, 2 * max_modes + 2)
    z1 = _pencil_poles(y, cap, L1, rtol)
    if z1.size == 0:
        return []
    z2 = _pencil_poles(y, cap, L2, rtol)

    s1 = np.log(z1) / prep.step  # complex rate: i 2 pi (f - fc) - gamma
    s2 = np.log(z2) / prep.step if z2.size else s1

    n = np.arange(m)
    V = np.exp(np.outer(n * prep.step, s1))
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericError(f"ill-conditioned mode fit (condition number {cond:.3g})")
    c, *_ = linalg.lstsq(V, y)

    # undo the filter gain and the time offset of the first kept sample
    if prep.taps is not None:
        j = np.arange(prep.taps.size)
        gain = np.exp(-np.outer(s1, j * prep.dt)) @ prep.taps
    else:
        gain = np.ones_like(s1)
    amp = c / (gain * np.exp(s1 * prep.t0))

    freq = prep.f_shift + s1.imag / (2 * math.pi)
    decay = -s1.real
    omega_abs = np.abs(2j * math.pi * prep.f_shift + s1)
    floor = 2 * math.pi / (sig.duration)
    err = np.min(np.abs(s1[:, None] - s2[None, :]), axis=1) / np.maximum(omega_abs, floor)

    edge = 2 / sig.duration
    keep = (freq >= band[0] - edge) & (freq <= band[1] + edge)
    modes = [
        ModeEstimate(max(float(f), 0.0) if abs(f) < edge else float(f), float(g), complex(a), float(e))
        for f, g, a, e, k in zip(freq, decay, amp, err, keep)
        if k
    ]
    if not modes:
        return []
    top = max(abs(mo.amplitude) for mo in modes)
    modes = [mo for mo in modes if abs(mo.amplitude) >= min_amplitude * top and mo.error <= max_error]
    modes.sort(key=lambda mo: -abs(mo.amplitude))
    return modes[:max_modes]


def synthesize(modes: Sequence[ModeEstimate], n: int, dt: float, real: bool = True) -> np.ndarray:
    """Sample the mode model; ``real`` adds the conjugate image of f > 0 modes."""
    t = np.arange(n) * dt
    out = np.zeros(n, complex)
    for mo in modes:
        term = mo.amplitude * np.exp((2j * math.pi * mo.frequency - mo.decay) * t)
        out += term
        if real and mo.frequency > 0:
            out += term.conj()
    return out.real if real else out


# --- CSV ---------------------------------------------------------------------------


def read_signal_csv(path, column: str = "value", band=None) -> RingdownSignal:
    """Probe series written as ``step,time,value`` columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or column not in rows[0] or "time" not in rows[0]:
        raise DomainError(f"{path}: need 'time' and '{column}' columns")
    t = np.array([float(r["time"]) for r in rows])
    x = np.array([float(r[column]) for r in rows])
    if t.size < 2:
        raise DomainError(f"{path}: too few rows")
    return RingdownSignal(x, float(np.median(np.diff(t))), band)


def write_signal_csv(path, sig: RingdownSignal, column: str = "value") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "time", column])
        for i, (t, v) in enumerate(zip(sig.times, sig.samples)):
            w.writerow([i, repr(float(t)), repr(float(v))])


MODE_COLUMNS = ["f_Hz", "c_over_lambda", "lambda_nm", "Q", "amplitude", "phase", "error", "growing"]


def write_modes_csv(path, modes: Sequence[ModeEstimate], period: float | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MODE_COLUMNS)
        for mo in modes:
            w.writerow(mode_row(mo, period))


def mode_row(mo: ModeEstimate, period: float | None = None) -> list:
    red = "" if period is None else f"{mo.reduced(period):.6f}"
    lam = mo.wavelength()
    return [
        f"{mo.frequency:.10g}",
        red,
        f"{lam * 1e9:.4f}" if math.isfinite(lam) else "inf",
        f"{mo.Q:.6g}",
        f"{abs(mo.amplitude):.6g}",
        f"{np.angle(mo.amplitude):.6f}",
        f"{mo.error:.3g}",
        "yes" if mo.growing else "no",
    ]


def read_modes_csv(path) -> list[ModeEstimate]:
    out = []
    with open(Path(path), newline="") as fh:
        for r in csv.DictReader(fh):
            f, q = float(r["f_Hz"]), float(r["Q"])
            decay = 0.0 if math.isinf(q) else math.pi * f / q
            a = float(r["amplitude"]) * np.exp(1j * float(r["phase"]))
            out.append(ModeEstimate(f, decay, complex(a), float(r["error"])))
    return out
