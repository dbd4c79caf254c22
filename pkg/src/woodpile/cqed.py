"""Dipole-cavity coupling on resonance: rates, regimes and Purcell factors.

All rates are angular (rad/s) internally; conversion to GHz/(2 pi) happens
only in reports.  Wavelengths and volumes are SI (m, m^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.constants import c as C0, e as E_CHARGE, epsilon_0 as EPS0, hbar as HBAR, m_e as M_E

from .errors import DomainError, NumericError

DEBYE = 3.33564e-30  # C m


@dataclass(frozen=True)
class EmitterSpec:
    """Two-level emitter.

    ``linewidth`` is the FWHM of the bare emission line (rad/s) and enters
    the eigenfrequencies and the strong-coupling ratio.  ``emission_rate``
    (1/s) is the spontaneous rate that fixes the transition dipole; it
    defaults to the linewidth.
    """

    wavelength: float
    linewidth: float
    n_host: float
    emission_rate: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if not (self.wavelength > 0 and self.n_host > 0 and self.linewidth >= 0):
            raise DomainError("emitter needs positive wavelength and host index, non-negative linewidth")
        if self.emission_rate is not None and self.emission_rate < 0:
            raise DomainError("emission rate must be non-negative")

    @classmethod
    def nv_centre(cls) -> "EmitterSpec":
        """NV centre zero-phonon line in nanodiamond (lifetime ~300 ns)."""
        return cls(637e-9, 2 * math.pi * 3.3e6, 2.4, 1.0 / 300e-9, "NV-ZPL")

    @property
    def omega(self) -> float:
        return 2 * math.pi * C0 / self.wavelength

    @property
    def rate(self) -> float:
        return self.linewidth if self.emission_rate is None else self.emission_rate


@dataclass(frozen=True)
class CavitySpec:
    wavelength: float
    Q: float
    V_eff: float
    n_def: float

    def __post_init__(self):
        if not (self.wavelength > 0 and self.Q > 0 and self.V_eff > 0 and self.n_def > 0):
            raise DomainError("cavity parameters must be positive")

    @classmethod
    def from_normalized(cls, wavelength, Q, V_n, n_def) -> "CavitySpec":
        return cls(wavelength, Q, V_n * (wavelength / n_def) ** 3, n_def)

    @property
    def omega(self) -> float:
        return 2 * math.pi * C0 / self.wavelength

    @property
    def kappa(self) -> float:
        return self.omega / self.Q

    @property
    def V_n(self) -> float:
        return normalized_volume(self.V_eff, self.wavelength, self.n_def)

    def volume_at(self, wavelength: float) -> float:
        """Mode volume rescaled to another wavelength at fixed V_n."""
        return self.V_n * (wavelength / self.n_def) ** 3


def normalized_volume(V_eff: float, wavelength: float, n: float) -> float:
    """V_eff / (lambda / n)^3."""
    if not (V_eff > 0 and wavelength > 0 and n > 0):
        raise DomainError("normalized volume needs positive inputs")
    return V_eff / (wavelength / n) ** 3


def dipole_moment(emitter: EmitterSpec) -> float:
    """Transition dipole d_EG (C m) from the spontaneous emission rate."""
    w = emitter.omega
    return math.sqrt(3 * math.pi * EPS0 * C0**3 * HBAR / (emitter.n_host * w**3) * emitter.rate)


def oscillator_strength(d_eg: float, omega_os: float) -> float:
    return 2 * M_E * omega_os * d_eg**2 / (E_CHARGE**2 * HBAR)


def coupling_rate_from_strength(f_eg: float, n_def: float, V_eff: float) -> float:
    """g_R from the oscillator strength (rad/s)."""
    return math.sqrt(math.pi * E_CHARGE**2 * f_eg / (4 * math.pi * EPS0 * n_def**2 * V_eff * M_E))


def _purcell_closed_form(Q, V, wavelength, n_def, n_os):
    return 3 * Q / (4 * math.pi**2 * V) * wavelength**3 / (n_def**2 * n_os)


def coupling_rate(cavity: CavitySpec, emitter: EmitterSpec) -> float:
    """Vacuum coupling g_R (rad/s) of the emitter to the cavity mode.

    Evaluated at the emitter wavelength: the volume is rescaled to
    lambda_os at fixed V_n, and kappa' = omega_os / Q.  The result is checked
    against the oscillator-strength route, which is algebraically equal.
    """
    V = cavity.volume_at(emitter.wavelength)
    kappa_os = emitter.omega / cavity.Q
    fp = _purcell_closed_form(cavity.Q, V, emitter.wavelength, cavity.n_def, emitter.n_host)
    g = math.sqrt(fp * kappa_os * emitter.rate / 4)
    f = oscillator_strength(dipole_moment(emitter), emitter.omega)
    g_alt = coupling_rate_from_strength(f, cavity.n_def, V)
    if g > 0 and abs(g_alt / g - 1) > 1e-9:
        raise NumericError(f"coupling-rate identity broken: {g} vs {g_alt}")
    return g


def eigenfrequencies(omega0: float, kappa: float, gamma: float, g: float) -> tuple[complex, complex]:
    """Complex eigenfrequencies (Omega_plus, Omega_minus) of the coupled system.

    Omega_plus continues the emitter-like branch (linewidth -> gamma as
    g -> 0) and carries the upper real part once the modes split.
    """
    delta = (kappa - gamma) / 4
    disc = g * g - delta * delta
    if disc >= 0:
        s = complex(math.sqrt(disc), 0.0)
    else:
        s = 1j * delta * math.sqrt(1.0 - (g / delta) ** 2)
    centre = complex(omega0, -(kappa + gamma) / 4)
    return centre + s, centre - s


def linewidths(omega0, kappa, gamma, g) -> tuple[float, float]:
    """FWHM of the two spectral components, -2 Im(Omega)."""
    op, om = eigenfrequencies(omega0, kappa, gamma, g)
    return -2 * op.imag, -2 * om.imag


class Regime(NamedTuple):
    ratio: float
    strong: bool
    split: bool

    @property
    def label(self) -> str:
        return "strong" if self.strong else "weak"


def coupling_regime(g: float, kappa: float, gamma: float) -> Regime:
    """Strong-coupling ratio 4g/(kappa+gamma) and the splitting condition 4g > |kappa-gamma|."""
    if g < 0 or kappa < 0 or gamma < 0 or kappa + gamma == 0:
        raise DomainError("rates must be non-negative with kappa + gamma > 0")
    ratio = 4 * g / (kappa + gamma)
    return Regime(ratio, ratio > 1, 4 * g > abs(kappa - gamma))


class Purcell(NamedTuple):
    value: float
    mode: str
    regime: str


def purcell_exact(kappa: float, gamma: float, g: float) -> float:
    """gamma_plus / gamma from the exact eigenfrequencies."""
    gp, _ = linewidths(0.0, kappa, gamma, g)
    return gp / gamma


def purcell_approx(kappa: float, gamma: float, g: float) -> float:
    """Weak-coupling estimate 4 g^2 / (kappa gamma)."""
    return 4 * g * g / (kappa * gamma)


def purcell_factor(cavity: CavitySpec, emitter: EmitterSpec, mode: str = "approx_simple") -> Purcell:
    """Purcell factor by one of three routes.

    ``exact``
        gamma_plus / gamma, valid whatever the regime; the regime is reported
        alongside.
    ``approx_full``
        3Q/(4 pi^2 V') * lambda_os^3 / (n_def^2 n_os), i.e. 4 g^2 / (kappa' rate).
    ``approx_simple``
        3Q (lambda_os / n_def)^3 / (4 pi^2 V'), the form used in the tables.
    """
    V = cavity.volume_at(emitter.wavelength)
    kappa_os = emitter.omega / cavity.Q
    g = coupling_rate(cavity, emitter)
    regime = coupling_regime(g, kappa_os, emitter.linewidth).label
    if mode == "exact":
        val = purcell_exact(kappa_os, emitter.linewidth, g)
    elif mode == "approx_full":
        val = _purcell_closed_form(cavity.Q, V, emitter.wavelength, cavity.n_def, emitter.n_host)
    elif mode == "approx_simple":
        val = 3 * cavity.Q * (emitter.wavelength / cavity.n_def) ** 3 / (4 * math.pi**2 * V)
    else:
        raise DomainError(f"unknown Purcell mode {mode!r}")
    return Purcell(val, mode, regime)


def luminescence_spectrum(omega, omega0: float, kappa: float, gamma: float, g: float) -> np.ndarray:
    """Emission spectrum on a real frequency grid, scaled to a maximum of 1."""
    w = np.asarray(omega, dtype=float)
    op, om = eigenfrequencies(omega0, kappa, gamma, g)
    amp = (op - omega0 + 0.5j * kappa) / (w - op) - (om - omega0 + 0.5j * kappa) / (w - om)
    s = np.abs(amp)
    peak = s.max() if s.size else 0.0
    return s / peak if peak > 0 else s


def vacuum_field(omega_os: float, n_def: float, V_eff: float) -> float:
    """Vacuum (single-photon) field amplitude E_sp in V/m.

    Reconstructed as sqrt(hbar omega / (2 eps0 n^2 V)); checked against the
    tabulated values by the test suite.
    """
    if not (omega_os > 0 and n_def > 0 and V_eff > 0):
        raise DomainError("vacuum field needs positive inputs")
    return math.sqrt(HBAR * omega_os / (2 * EPS0 * n_def**2 * V_eff))


@dataclass(frozen=True)
class CavityMetrics:
    wavelength: float
    Q: float
    V_eff: float
    V_n: float
    V_eff_os: float
    purcell: float
    kappa: float
    tau_uc: float
    kappa_os: float
    tau_os: float
    g: float
    tau_R: float
    ratio: float
    strong: bool
    d_eg: float
    f_eg: float
    E_sp: float
    reduced_frequency: float | None = None
    label: str = ""

    def report(self) -> dict:
        """Row in reporting units (nm, um^3, GHz, ns)."""
        ghz = 1 / (2 * math.pi * 1e9)
        return {
            "label": self.label,
            "c/lambda0": self.reduced_frequency,
            "lambda0_nm": self.wavelength * 1e9,
            "Q": self.Q,
            "V_eff_um3": self.V_eff * 1e18,
            "V_n": self.V_n,
            "F_p": self.purcell,
            "kappa/2pi_GHz": self.kappa * ghz,
            "tau_uc_ns": self.tau_uc * 1e9,
            "V_eff_os_um3": self.V_eff_os * 1e18,
            "kappa_os/2pi_GHz": self.kappa_os * ghz,
            "tau_os_ns": self.tau_os * 1e9,
            "g_R/2pi_GHz": self.g * ghz,
            "tau_R_ns": self.tau_R * 1e9,
            "4g/(kappa+gamma)": self.ratio,
            "regime": "strong" if self.strong else "weak",
            "d_EG_Cm": self.d_eg,
            "f_EG": self.f_eg,
            "E_sp_V/m (reconstructed)": self.E_sp,
        }


def cavity_metrics(
    cavity: CavitySpec, emitter: EmitterSpec, period: float | None = None, label: str = ""
) -> CavityMetrics:
    """Every derived table quantity for one cavity mode."""
    V_os = cavity.volume_at(emitter.wavelength)
    kappa_os = emitter.omega / cavity.Q
    g = coupling_rate(cavity, emitter)
    regime = coupling_regime(g, kappa_os, emitter.linewidth)
    d = dipole_moment(emitter)
    return CavityMetrics(
        wavelength=cavity.wavelength,
        Q=cavity.Q,
        V_eff=cavity.V_eff,
        V_n=cavity.V_n,
        V_eff_os=V_os,
        purcell=purcell_factor(cavity, emitter, "approx_simple").value,
        kappa=cavity.kappa,
        tau_uc=2 * math.pi / cavity.kappa,
        kappa_os=kappa_os,
        tau_os=2 * math.pi / kappa_os,
        g=g,
        tau_R=2 * math.pi / g if g > 0 else math.inf,
        ratio=regime.ratio,
        strong=regime.strong,
        d_eg=d,
        f_eg=oscillator_strength(d, emitter.omega),
        E_sp=vacuum_field(emitter.omega, cavity.n_def, V_os),
        reduced_frequency=None if period is None else period / cavity.wavelength,
        label=label,
    )


def metrics_table(
    rows: Sequence[CavitySpec | None], emitter: EmitterSpec, period: float | None = None,
    labels: Sequence[str] | None = None,
) -> list[CavityMetrics | None]:
    """Metrics for each row; ``None`` rows (no resonance found) stay ``None``."""
    labels = list(labels) if labels is not None else [""] * len(rows)
    return [
        None if cav is None else cavity_metrics(cav, emitter, period, lab)
        for cav, lab in zip(rows, labels)
    ]
