"""Pipeline configuration documents (INI syntax with mandatory units).

Every physical quantity carries its unit in the value, e.g. ``period =
335.8 nm`` or ``linewidth = 3.3 MHz``.  Unknown sections or keys, missing
or wrong units are rejected with the offending line number.
"""

from __future__ import annotations

import configparser
import math
import re
from decimal import Decimal, InvalidOperation
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

LENGTH = {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "m": 1.0}
FREQUENCY = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}
TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12, "fs": 1e-15}
REDUCED = {"c/lambda": 1.0}
CELLS = {"cells": 1.0}
PER_A = {"cells/a": 1.0}


@dataclass(frozen=True)
class Key:
    kind: str  # "int", "float", "str", "bool", "list", "path" or a unit-table name
    default: object = None
    count: int = 1  # number of values for vector quantities


UNIT_TABLES = {
    "length": LENGTH,
    "frequency": FREQUENCY,
    "time": TIME,
    "reduced": REDUCED,
    "cells": CELLS,
    "per_a": PER_A,
}

SCHEMA: dict[str, dict[str, Key]] = {
    "structure": {
        "period": Key("length", 335.8e-9),
        "w_over_c": Key("float", 0.2145),
        "c_over_a": Key("float", math.sqrt(2)),
        "h_over_c": Key("float", 0.25),
        "layers": Key("int", 17),
        "rods": Key("int", 7),
        "n_rod": Key("float", 3.3),
        "n_defect": Key("float", 3.3),
        "n_buffer": Key("float", 1.0),
        "defect": Key("str", "D1"),
        "buffer": Key("str", "none"),
    },
    "bands": {
        "path": Key("str", ""),
        "plane_waves": Key("int", 400),
        "points_per_segment": Key("int", 4),
        "bands": Key("int", 6),
        "method": Key("str", "inverse-eps"),
    },
    "sweep": {
        "w_over_c": Key("list", "0.15:0.30:0.01"),
        "plane_waves": Key("int", 340),
        "points_per_segment": Key("int", 4),
        "workers": Key("int", 1),
    },
    "fdtd": {
        "resolution": Key("per_a", 16.0),
        "steps": Key("int", 12000),
        "boundary": Key("str", "pml"),
        "pml": Key("cells", 8),
        "padding": Key("cells", 6),
        "orientation": Key("str", "ex"),
        "centre": Key("reduced", 0.5271),
        "bandwidth": Key("reduced", 0.16),
        "probe_offset": Key("length", None, 3),
        "subpixel": Key("bool", True),
        "snapshot": Key("bool", True),
        "threads": Key("int", 0),
    },
    "fit": {
        "band": Key("reduced", (0.4853, 0.5689), 2),
        "max_modes": Key("int", 12),
    },
    "emitter": {
        "preset": Key("str", "NV"),
        "wavelength": Key("length", None),
        "linewidth": Key("frequency", None),
        "lifetime": Key("time", None),
        "n_host": Key("float", None),
    },
    "output": {
        "directory": Key("path", "out"),
        "cache": Key("path", ""),
    },
}


@dataclass
class PipelineConfig:
    sections: dict[str, dict[str, object]]
    source: str = "<string>"
    present: frozenset = field(default_factory=frozenset)

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.sections[section]

    def has(self, section: str) -> bool:
        return section in self.present

    def override(self, section: str, key: str, value) -> None:
        """Replace one parsed value (command-line flags use this)."""
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown key [{section}] {key}")
        self.sections.setdefault(section, {})[key] = value


def _line_of(text: str, section: str | None, key: str | None = None) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return no
    return None


def _where(source, line) -> str:
    return f"{source}:{line}" if line else source


def _number(tok: str, key: str, loc: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigurationError(f"{loc}: {key} expects a number, got {tok!r}") from None


def _scaled(tok: str, scale: float, key: str, loc: str) -> float:
    # decimal product, so "335.8 nm" gives exactly the float 335.8e-9
    try:
        return float(Decimal(tok) * Decimal(repr(scale)))
    except InvalidOperation:
        raise ConfigurationError(f"{loc}: {key} expects a number, got {tok!r}") from None


def parse_value(raw: str, spec: Key, key: str, loc: str):
    raw = raw.strip()
    if spec.kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"{loc}: {key} expects an integer, got {raw!r}") from None
    if spec.kind == "float":
        if len(raw.split()) != 1:
            raise ConfigurationError(f"{loc}: {key} is dimensionless and takes no unit, got {raw!r}")
        return _number(raw, key, loc)
    if spec.kind == "bool":
        low = raw.lower()
        if low in ("yes", "true", "on", "1"):
            return True
        if low in ("no", "false", "off", "0"):
            return False
        raise ConfigurationError(f"{loc}: {key} expects yes/no, got {raw!r}")
    if spec.kind in ("str", "path"):
        return raw
    if spec.kind == "list":
        return parse_float_list(raw, key, loc)
    table = UNIT_TABLES[spec.kind]
    toks = raw.split()
    if len(toks) != spec.count + 1:
        units = ", ".join(sorted(table))
        raise ConfigurationError(
            f"{loc}: {key} needs {spec.count} value(s) followed by a unit ({units}), got {raw!r}"
        )
    unit = toks[-1]
    scale = table.get(unit) or table.get(unit.lower())
    if scale is None:
        raise ConfigurationError(f"{loc}: unit {unit!r} not valid for {key}; use one of {', '.join(sorted(table))}")
    vals = tuple(_scaled(t, scale, key, loc) for t in toks[:-1])
    return vals[0] if spec.count == 1 else vals


def parse_float_list(raw: str, key: str = "values", loc: str = "") -> tuple[float, ...]:
    """Comma/space separated floats, or ``start:stop:step`` (inclusive)."""
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"{loc}: {key} range must be start:stop:step")
        a, b, s = (_number(p, key, loc) for p in parts)
        if s <= 0 or b < a:
            raise ConfigurationError(f"{loc}: {key} range must increase with a positive step")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(round(a + i * s, 12) for i in range(n))
    return tuple(_number(t, key, loc) for t in raw.replace(",", " ").split())


def _default(spec: Key):
    if spec.kind == "list" and isinstance(spec.default, str):
        return parse_float_list(spec.default)
    return spec.default


def loads(text: str, source: str = "<string>") -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case for the error messages
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    out = {name: {k: _default(spec) for k, spec in keys.items()} for name, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            line = _line_of(text, section)
            raise ConfigurationError(f"{_where(source, line)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            loc = _where(source, _line_of(text, section, key))
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"{loc}: unknown key {key!r} in [{section}]")
            out[section][key] = parse_value(raw, SCHEMA[section][key], key, loc)
    return PipelineConfig(out, source, frozenset(parser.sections()))


def load(path) -> PipelineConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc.strerror}") from None
    return loads(text, str(p))
