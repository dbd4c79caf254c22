import math

import pytest
from hypothesis import given, strategies as st

from woodpile.config import SCHEMA, load, loads, parse_float_list
from woodpile.errors import ConfigurationError


def test_defaults_when_empty():
    cfg = loads("")
    assert cfg["structure"]["period"] == 335.8e-9
    assert cfg["fit"]["band"] == (0.4853, 0.5689)
    assert not cfg.has("bands")


@pytest.mark.parametrize(
    "text, value",
    [
        ("period = 335.8 nm", 335.8e-9),
        ("period = 0.3358 um", 335.8e-9),
        ("period = 3.358e-7 m", 3.358e-7),
    ],
)
def test_length_units(text, value):
    assert loads(f"[structure]\n{text}\n")["structure"]["period"] == pytest.approx(value, rel=1e-15)


def test_nanometres_give_the_literal_float():
    assert loads("[structure]\nperiod = 335.8 nm\n")["structure"]["period"] == 335.8e-9


def test_emitter_units():
    cfg = loads("[emitter]\nwavelength = 637 nm\nlinewidth = 3.3 MHz\nlifetime = 300 ns\nn_host = 2.4\n")
    e = cfg["emitter"]
    assert e["linewidth"] == pytest.approx(3.3e6)
    assert e["lifetime"] == pytest.approx(300e-9)


def test_unknown_key_names_key_and_line():
    text = "# comment\n[fdtd]\nsteps = 100\n\nresolutio = 8 cells/a\n"
    with pytest.raises(ConfigurationError) as err:
        loads(text, "desk.cfg")
    assert "resolutio" in str(err.value) and "desk.cfg:5" in str(err.value)


def test_unknown_section_names_line():
    with pytest.raises(ConfigurationError) as err:
        loads("[structure]\n\n[plots]\nx = 1\n", "a.cfg")
    assert "[plots]" in str(err.value) and "a.cfg:3" in str(err.value)


@pytest.mark.parametrize(
    "text",
    [
        "[structure]\nperiod = 335.8\n",  # missing unit
        "[structure]\nperiod = 335.8 GHz\n",  # wrong dimension
        "[structure]\nw_over_c = 0.2 nm\n",  # dimensionless with a unit
        "[fdtd]\nsteps = many\n",
        "[fdtd]\nsubpixel = maybe\n",
        "[fit]\nband = 0.48 c/lambda\n",  # needs two values
        "[sweep]\nw_over_c = 0.3:0.1:0.01\n",
        "not an ini file",
    ],
)
def test_rejected_values(text):
    with pytest.raises(ConfigurationError):
        loads(text)


def test_override_checks_key():
    cfg = loads("")
    cfg.override("fdtd", "steps", 10)
    assert cfg["fdtd"]["steps"] == 10
    with pytest.raises(ConfigurationError):
        cfg.override("fdtd", "stpes", 10)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load(tmp_path / "nope.cfg")


def test_bundled_configs_parse():
    from pathlib import Path

    for path in sorted((Path(__file__).parents[1] / "configs").glob("*.cfg")):
        load(path)


def test_every_physical_key_demands_a_unit():
    for section, keys in SCHEMA.items():
        for key, spec in keys.items():
            if spec.kind in ("length", "frequency", "time", "reduced", "cells", "per_a"):
                with pytest.raises(ConfigurationError):
                    loads(f"[{section}]\n{key} = {' '.join(['1'] * spec.count)}\n")


@given(st.floats(0.01, 0.5), st.integers(1, 40), st.floats(0.001, 0.05))
def test_range_is_inclusive_and_evenly_spaced(a, n, step):
    b = a + n * step
    vals = parse_float_list(f"{a}:{b}:{step}")
    assert len(vals) == n + 1
    assert vals[-1] == pytest.approx(b, abs=1e-9)
    assert all(math.isclose(y - x, step, abs_tol=1e-9) for x, y in zip(vals, vals[1:]))
