import json
import shutil
import subprocess

import pytest

from lpme.cli import main


def write_config(path, **kw):
    cfg = {
        "problem": "multinomial",
        "mechanisms": ["randomized_response", "mle"],
        "d": 3,
        "n_grid": [100, 1000, 10000, 100000],
        "epsilon_grid": [1.0],
        "trials": 30,
        "seed": 0,
        "timing": False,
        "checks": [{"type": "slope", "name": "rr", "mechanism": "randomized_response", "epsilon": 1.0, "expected": -1.0, "tolerance": 0.15}],
    }
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return path


def test_sweep_passes_and_writes(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "out"
    assert main(["multinomial", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "summary.json").read_text())
    assert doc["all_pass"] and doc["checks"][0]["name"] == "rr"
    assert "PASS rr" in capsys.readouterr().out


def test_sweep_failing_check_exits_1(tmp_path):
    cfg = write_config(tmp_path / "c.json", checks=[{"type": "slope", "mechanism": "mle", "expected": -2.0, "tolerance": 0.1}])
    assert main(["multinomial", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_global_flags_either_side(tmp_path):
    cfg = write_config(tmp_path / "c.json", checks=[])
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--seed", "3", "--trials", "4", "multinomial", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["multinomial", "--config", str(cfg), "--out", str(b), "--seed", "3", "--trials", "4", "--workers", "2"]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert ",4," in (a / "results.csv").read_text().splitlines()[1]


def test_problem_mismatch(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert main(["density", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", n_grid=[10, 5])
    assert main(["multinomial", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("mech, dims", [("randomized_response", 4), ("halfspace_series", 3), ("laplace_histogram", 5)])
def test_audit(tmp_path, mech, dims):
    out = tmp_path / "r.json"
    assert main(["audit", "--mechanism", mech, "--epsilon", "1", "--dims", str(dims), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["pass"] and doc["max_log_ratio"] <= 1 + 1e-9


def test_bounds_density(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bounds", "--problem", "density", "--n", "10000", "--epsilon", "0.2", "--beta", "1", "--k", "16", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["info_bound"] > 0 and doc["fano_bound"] >= 0
    assert doc["packing"]["min_l1_separation"] >= 8


def test_bounds_multinomial_outside_range(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bounds", "--problem", "multinomial", "--n", "1000", "--epsilon", "1", "--d", "16", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["info_bound"] is None and doc["predict_rates"]["private_upper"] == pytest.approx(0.016)


def test_bounds_missing_args(tmp_path):
    assert main(["bounds", "--problem", "density", "--n", "10", "--epsilon", "0.1", "--out", str(tmp_path / "b.json")]) == 2


def test_slope(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "out"
    main(["multinomial", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    csv = str(out / "results.csv")
    assert main(["slope", "--in", csv, "--mechanism", "mle", "--expected", "-1", "--tolerance", "0.1"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["pass"] and abs(fit["slope"] + 1) < 0.1
    assert main(["slope", "--in", csv, "--mechanism", "randomized_response", "--epsilon", "1", "--expected", "-3"]) == 1
    assert main(["slope", "--in", str(tmp_path / "missing.csv"), "--mechanism", "mle"]) == 2


@pytest.mark.skipif(shutil.which("lpme") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = tmp_path / "r.json"
    res = subprocess.run(["lpme", "audit", "--mechanism", "randomized_response", "--epsilon", "0.5", "--dims", "3", "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["pass"] is True
