from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from twohol.cli import SCENARIOS, UsageError, load_config, main
from twohol.report import parse_records


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_names_every_scenario(capsys):
    code, out, _ = _run(["list"], capsys)
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == list(SCENARIOS)


def test_trivial_passes(capsys):
    code, out, _ = _run(["trivial", "--steps", "8"], capsys)
    assert code == 0 and out.splitlines()[-1] == "passed 2/2"


def test_inner_annulus_at_coarse_steps_fails(capsys):
    # 8 steps per unit leaves a closure mismatch far above the default 1e-5 tolerance
    code, out, _ = _run(["inner-annulus", "--steps", "8", "--format", "records"], capsys)
    assert code == 1
    header, checks, _ = parse_records(out)
    assert header["steps_per_unit"] == 8 and header["seed"] == 0
    assert any(c["status"] == "fail" for c in checks)


def test_bad_config_names_the_field(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[run]\nscenario = trivial\nsteps = many\n")
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 2 and "run.steps" in err
    with pytest.raises(UsageError, match="run.colour: unknown key"):
        cfg.write_text("[run]\ncolour = red\n")
        load_config(str(cfg))


@pytest.mark.parametrize("argv", [["nope"], ["trivial", "--steps", "0"], ["trivial", "--tolerance", "-1"],
                                  ["trivial", "--workers", "0"], ["run"]])
def test_usage_errors_exit_2(argv, capsys):
    assert _run(argv, capsys)[0] == 2


def test_config_conflict_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[run]\nscenario = trivial\nsteps = 4\nformat = records\nseed = 5\n")
    code, out, _ = _run(["run", "--config", str(cfg), "--steps", "6"], capsys)
    header = parse_records(out)[0]
    assert code == 0 and header["steps_per_unit"] == 6 and header["seed"] == 5
    assert _run(["abelian-stokes", "--config", str(cfg)], capsys)[0] == 2


def test_records_are_byte_identical(capsys):
    argv = ["abelian-stokes", "--steps", "32", "--seed", "2", "--format", "records"]
    a = _run(argv, capsys)[1]
    b = _run(argv, capsys)[1]
    assert a == b and a


def test_sphere_gerbe_report(capsys):
    code, out, _ = _run(["sphere-gerbe", "--flux", "0.3", "--format", "records"], capsys)
    header, checks, outputs = parse_records(out)
    assert code == 0 and header["flux"] == 0.3
    assert outputs["hol_alpha_residual"] == 0.0
    hol = outputs["hol"]["re"][0][0] + 1j * outputs["hol"]["im"][0][0]
    assert abs(hol - np.exp(-2j * np.pi * 0.3)) < 1e-5


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "twohol.cli", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sphere-gerbe" in proc.stdout
