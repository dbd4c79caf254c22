import subprocess
import sys

import pytest

from woodpile import cli, pipeline
from woodpile.errors import NumericError, ResourceError
from woodpile.fdtd import C0
from woodpile.specfit import ModeEstimate, RingdownSignal, synthesize, write_signal_csv


def test_cqed_row(capsys, tmp_path):
    rc = cli.main(["cqed", "--Q", "7.54e5", "--V-eff", "1.17e-3", "--wavelength", "638.98",
                   "--label", "D1/Ex", "--csv", str(tmp_path / "m.csv")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "D1/Ex" in out and "3.56e+05" in out
    header = (tmp_path / "m.csv").read_text().splitlines()[0]
    assert "g_R/2pi_GHz" in header


def test_cqed_normalised_volume(capsys):
    assert cli.main(["cqed", "--Q", "7.54e5", "--V-n", "0.161", "--wavelength", "638.98"]) == 0
    assert "0.161" in capsys.readouterr().out


def test_cqed_table_replay(capsys):
    assert cli.main(["cqed", "table"]) == 0
    out = capsys.readouterr().out
    assert "Table I" in out and "Table II" in out and "A2/Ez" in out


def test_missing_arguments_exit_2(capsys):
    assert cli.main(["cqed", "--Q", "10"]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[structure]\nperiod = 335.8 nm\nlayres = 5\n")
    assert cli.main(["pipeline", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "layres" in err and "bad.cfg:3" in err


@pytest.mark.parametrize("exc, code", [(NumericError("diverged"), 3), (ResourceError("too big", 10**12), 4)])
def test_error_classes_map_to_exit_codes(monkeypatch, tmp_path, exc, code):
    def boom(*args):
        raise exc

    monkeypatch.setattr(pipeline, "STAGES", (("bands", boom),))
    cfg = tmp_path / "b.cfg"
    cfg.write_text("[bands]\nplane_waves = 40\n")
    assert cli.main(["pipeline", str(cfg), "--out", str(tmp_path / "o")]) == code


def test_bands_subcommand(tmp_path, capsys):
    rc = cli.main(["bands", "--plane-waves", "60", "--points", "1", "--path", "X W' L", "--out", str(tmp_path)])
    assert rc == 0
    assert "gap_midgap_ratio" in capsys.readouterr().out
    assert (tmp_path / "bands.csv").exists() and not (tmp_path / "probe.csv").exists()


def test_sweep_subcommand(tmp_path, capsys):
    rc = cli.main(["--jobs", "1", "sweep", "--range", "0.2,0.25", "--plane-waves", "40", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3


def test_fit_subcommand(tmp_path, capsys):
    period = 335.8e-9
    f = 0.5255 * C0 / period
    dt = 2.8e-17
    x = synthesize([ModeEstimate(f, f * 3.141592653589793 / 2000, 1.0)], 4000, dt)
    write_signal_csv(tmp_path / "p.csv", RingdownSignal(x, dt))
    rc = cli.main(["fit", str(tmp_path / "p.csv"), "--period", "335.8", "--band", "0.48", "0.57",
                   "--out", str(tmp_path / "modes.csv")])
    assert rc == 0
    row = (tmp_path / "modes.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(0.5255, rel=1e-4)
    assert float(row[3]) == pytest.approx(2000, rel=1e-2)


def test_modevol_subcommand(tmp_path, capsys):
    import numpy as np

    from woodpile.modevol import FieldSnapshot

    ones = np.ones((4, 4, 4))
    snap = FieldSnapshot(ones + 0j, 0j * ones, 0j * ones, ones, (1e-8,) * 3, frequency=C0 / 600e-9)
    snap.write(tmp_path / "s")
    rc = cli.main(["modevol", str(tmp_path / "s"), "--linecut", "y", "--linecut-prefix", str(tmp_path / "cut"),
                   "--out", str(tmp_path / "r.json")])
    assert rc == 0
    assert "V_eff_um3" in capsys.readouterr().out
    assert (tmp_path / "cut_y.csv").exists()


def test_selftest():
    out = subprocess.run([sys.executable, "-m", "woodpile.cli", "selftest"], capture_output=True, text=True)
    assert out.returncode == 0, out.stdout + out.stderr
    assert out.stdout.count("PASS") == 5
