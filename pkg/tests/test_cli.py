import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rntip.cli import main


def _run(tmp_path, command, cfg=None, *extra):
    args = [command, "--out", str(tmp_path / command)]
    if cfg is not None:
        path = tmp_path / f"{command}_in.json"
        path.write_text(json.dumps(cfg))
        args += ["--config", str(path)]
    return main(args + list(extra)), tmp_path / command


def _svg_ok(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")


def test_deterministic_command(tmp_path, capsys):
    code, out = _run(tmp_path, "deterministic", {"r_grid": [1.0, 1.5], "bisection": None})
    assert code == 0
    assert json.loads((out / "outcomes.json").read_text()) == {"1": "tracks", "1.5": "tips"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["seed"] == 0
    for name in manifest["artifacts"]:
        assert (out / name).exists()
    _svg_ok(out / "deterministic.svg")
    assert "r=1: tracks" in capsys.readouterr().out


def test_default_grid_outcomes(tmp_path):
    code, out = _run(tmp_path, "deterministic", {"bisection": {"interval": [1.0, 2.0], "tol": 1e-3}},
                     "--no-plots")
    assert code == 0
    outcomes = json.loads((out / "outcomes.json").read_text())
    assert list(outcomes.values()) == ["tracks", "tracks", "tracks", "tips", "tips"]
    crit = json.loads((out / "critical_rate.json").read_text())
    assert abs(crit["r_est"] - 4 / 3) < 1e-3
    assert not (out / "deterministic.svg").exists()


def test_config_echo_reproduces_run(tmp_path):
    cfg = {"r": 1.0, "sigma1": 0.25, "n_realizations": 60, "plot_paths": 5}
    code, out = _run(tmp_path, "montecarlo", cfg, "--seed", "17")
    assert code == 0
    echo = out / "config.json"
    assert json.loads(echo.read_text())["seed"] == 17
    code2 = main(["montecarlo", "--config", str(echo), "--out", str(tmp_path / "again")])
    assert code2 == 0
    for name in ("summary.json", "first_passage.csv"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    _svg_ok(out / "tipped.svg")


def test_csv_full_precision(tmp_path):
    code, out = _run(tmp_path, "deterministic", {"r_grid": [0.5], "bisection": None}, "--no-plots")
    assert code == 0
    with open(out / "trajectory_r0.5.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x", "y"]
    vals = np.array(rows[1:], dtype=float)
    # repr output round-trips exactly, so at least 15 significant digits survive
    assert all(repr(float(s)) == s for s in rows[5])
    assert np.all(np.diff(vals[:, 0]) > 0)


def test_heteroclinic_command(tmp_path):
    code, out = _run(tmp_path, "heteroclinic", {"pairs": [[1.0, 0.25]]})
    assert code == 0
    summ = json.loads((out / "r1_s0.25" / "summary.json").read_text())
    assert abs(summ["y_star"] - 1.5) < 1e-6
    assert summ["action"] == pytest.approx(0.054, rel=0.05)
    _svg_ok(out / "r1_s0.25" / "section.svg")
    _svg_ok(out / "r1_s0.25" / "orbit.svg")


def test_scaling_with_points(tmp_path):
    pts = [[0.3, 9.14 * (1 / 0.09) ** 0.027], [0.2, 9.14 * 25 ** 0.027], [0.1, 9.14 * 100 ** 0.027]]
    code, out = _run(tmp_path, "scaling", {"fits": [{"r": 1.0, "points": pts}]})
    assert code == 0
    fit = json.loads((out / "scaling_r1.json").read_text())
    assert fit["b"] == pytest.approx(0.027, rel=1e-9)
    _svg_ok(out / "scaling.svg")


@pytest.mark.parametrize("cfg, extra", [
    ({"pairs": [[1.5, 0.25]]}, ()),            # supercritical
    ({"bogus": 1}, ()),                       # unknown key
    ({"pairs": [[1.0, -0.1]]}, ()),           # negative noise
    (None, ("--threads", "0")),
])
def test_config_errors_exit_2(tmp_path, cfg, extra):
    code, _ = _run(tmp_path, "heteroclinic", cfg, *extra)
    assert code == 2


def test_bad_json_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["deterministic", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    # a single round cannot pass the strict error tolerance
    cfg = {"grid": [[1.0, 0.25]], "n_start": 200, "max_rounds": 1, "err_tol": 1e-6}
    code, out = _run(tmp_path, "tiptime", cfg)
    assert code == 3
    row = json.loads((out / "distribution_r1_s0.25.json").read_text())
    assert row["status"] == "not-converged"
    assert json.loads((out / "manifest.json").read_text())["status"] == "numerical-failure"


def test_no_escapes_exit_3(tmp_path):
    cfg = {"grid": [[1.0, 0.01]], "n_start": 100}
    code, _ = _run(tmp_path, "tiptime", cfg)
    assert code == 3


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rntip.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
    res = subprocess.run([sys.executable, "-m", "rntip.cli", "nonsense"], capture_output=True, text=True)
    assert res.returncode == 2
