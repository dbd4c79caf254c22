"""Published cavity tables shipped with the package, for replay and regression."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from functools import lru_cache
from importlib import resources

from .cqed import CavityMetrics, CavitySpec, EmitterSpec, cavity_metrics

# csv column -> CavityMetrics.report() key
COLUMNS = {
    "c_over_lambda": "c/lambda0",
    "lambda_nm": "lambda0_nm",
    "Q": "Q",
    "V_eff_um3": "V_eff_um3",
    "V_n": "V_n",
    "F_p": "F_p",
    "kappa_GHz": "kappa/2pi_GHz",
    "tau_uc_ns": "tau_uc_ns",
    "V_eff_os_um3": "V_eff_os_um3",
    "kappa_os_GHz": "kappa_os/2pi_GHz",
    "tau_os_ns": "tau_os_ns",
    "E_sp": "E_sp_V/m (reconstructed)",
    "g_GHz": "g_R/2pi_GHz",
    "tau_R_ns": "tau_R_ns",
}

N_DEF = 3.3


@dataclass(frozen=True)
class TableRow:
    table: str
    defect: str
    buffer: str
    orientation: str
    cavity: CavitySpec | None
    printed: dict = field(default_factory=dict)
    printed_text: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"{self.buffer or self.defect}/{self.orientation}"


@lru_cache(maxsize=1)
def load_rows() -> tuple[TableRow, ...]:
    text = resources.files("woodpile").joinpath("data/published_tables.csv").read_text()
    rows = []
    for rec in csv.DictReader(text.splitlines()):
        raw = {COLUMNS[k]: rec[k].strip() for k in COLUMNS}
        if raw["Q"] == "n/a":
            cavity, printed = None, {}
        else:
            printed = {k: float(v) for k, v in raw.items()}
            cavity = CavitySpec(
                printed["lambda0_nm"] * 1e-9, printed["Q"], printed["V_eff_um3"] * 1e-18, N_DEF
            )
        rows.append(
            TableRow(rec["table"], rec["defect"], rec["buffer"], rec["orientation"], cavity, printed, raw)
        )
    return tuple(rows)


def metrics_by_label(emitter: EmitterSpec | None = None) -> dict[str, CavityMetrics]:
    emitter = emitter or EmitterSpec.nv_centre()
    return {r.label: cavity_metrics(r.cavity, emitter, label=r.label) for r in load_rows() if r.cavity}


def round_like(value: float, text: str) -> float:
    """Round ``value`` half-up to the precision shown in ``text`` ("0.07", "7.05e-4")."""
    if not math.isfinite(value):
        return value
    t = text.strip().lower()
    if "e" in t:
        mant, _ = t.split("e")
        digits = len(mant.split(".")[1]) if "." in mant else 0
        return float(f"{value:.{digits}e}") if value else 0.0
    digits = len(t.split(".")[1]) if "." in t else 0
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def resolution(text: str) -> float:
    """Size of one unit in the last printed digit of ``text``."""
    t = text.strip().lower()
    mant, _, exp = t.partition("e")
    digits = len(mant.split(".")[1]) if "." in mant else 0
    return 10.0 ** (-digits + (int(exp) if exp else 0))
