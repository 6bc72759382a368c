import json
import subprocess
import sys

import pytest

from lpnse.cli import main
from lpnse.config import RunManifest, read_csv

CONFIG = """\
grid.n = 8
dt = 1e-2
t_end = 0.05
diag_every = 1
initial_condition = {ic}
ic.amplitude = {amp}
c_hat = 0.9
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "tg.cfg").write_text(CONFIG.format(ic="taylor_green_2d3", amp=1.0))
    (tmp_path / "rs.cfg").write_text(CONFIG.format(ic="random_spectrum", amp=0.2))
    return tmp_path


def test_simulate_writes_run_dir(workdir, capsys):
    out = workdir / "run"
    assert main(["simulate", str(workdir / "tg.cfg"), "--out", str(out)]) == 0
    manifest = RunManifest.from_json((out / "manifest.json").read_text())
    assert manifest.files == sorted(p.name for p in out.iterdir())
    assert {"diagnostics.csv", "u0.snap", "final.snap", "verdict.json"} <= set(manifest.files)
    cols, rows = read_csv(out / "diagnostics.csv")
    assert cols[:5] == ["time", "l2", "grad_l2", "lap_l2", "besov_m1_inf_inf"]
    assert len(rows) == 6
    assert json.loads((out / "verdict.json").read_text())["invariants_held"] is True


def test_force_and_hash(workdir, capsys):
    cfg = str(workdir / "tg.cfg")
    a, b = workdir / "a", workdir / "b"
    assert main(["simulate", cfg, "--out", str(a)]) == 0
    assert main(["simulate", cfg, "--out", str(a)]) == 2
    assert "force" in capsys.readouterr().err
    assert main(["simulate", cfg, "--out", str(a), "--force"]) == 0
    assert main(["simulate", cfg, "--out", str(b)]) == 0
    ha = json.loads((a / "manifest.json").read_text())["config_hash"]
    hb = json.loads((b / "manifest.json").read_text())["config_hash"]
    assert ha == hb


def test_seed_override(workdir):
    out = workdir / "run"
    assert main(["simulate", str(workdir / "rs.cfg"), "--out", str(out), "--seed", "7"]) == 0
    assert json.loads((out / "manifest.json").read_text())["seeds"] == [7]


def test_rejected_run_exits_nonzero(workdir):
    (workdir / "fast.cfg").write_text(CONFIG.format(ic="taylor_green_2d3", amp=100.0).replace("1e-2", "5e-2"))
    assert main(["simulate", str(workdir / "fast.cfg"), "--out", str(workdir / "r")]) == 1


def test_config_error_reported(workdir, capsys):
    (workdir / "bad.cfg").write_text("viscocity = 1\n")
    assert main(["simulate", str(workdir / "bad.cfg"), "--out", str(workdir / "r")]) == 2
    assert "did you mean 'viscosity'" in capsys.readouterr().err


def test_norms_and_audit(workdir, capsys):
    out = workdir / "run"
    main(["simulate", str(workdir / "tg.cfg"), "--out", str(out)])
    csv_path = workdir / "norms.csv"
    assert main(["norms", str(out / "u0.snap"), "--out", str(csv_path)]) == 0
    cols, rows = read_csv(csv_path)
    assert cols[1] == "l2" and len(rows) == 1
    capsys.readouterr()
    assert main(["audit", str(out / "final.snap")]) == 0
    audit = json.loads(capsys.readouterr().out)
    assert abs(audit["identity_ratio"] - 1.0) <= 1e-12


def test_check_interp(workdir):
    out = workdir / "c.json"
    assert main(["check-interp", "--size", "4", "--n", "8", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["c_hat"] * d["eps0_hat"] == 1.0
    assert d["corpus"]["seeds"] == [0, 1, 2, 3]


def test_constant_file_used(workdir):
    main(["check-interp", "--size", "4", "--n", "8", "--out", str(workdir / "c.json")])
    text = CONFIG.format(ic="taylor_green_2d3", amp=1.0).replace("c_hat = 0.9", "constant_file = c.json")
    (workdir / "cf.cfg").write_text(text)
    out = workdir / "run"
    assert main(["simulate", str(workdir / "cf.cfg"), "--out", str(out)]) == 0
    assert (out / "estimate.json").exists()


def test_sweep_deterministic(workdir):
    (workdir / "plan.txt").write_text("tg.cfg\nrs.cfg ic.seed=2\nrs.cfg ic.amplitude=0.4\n")
    s1, s2 = workdir / "s1.csv", workdir / "s2.csv"
    assert main(["sweep", str(workdir / "plan.txt"), "--out", str(s1), "--workers", "1"]) == 0
    assert main(["sweep", str(workdir / "plan.txt"), "--out", str(s2), "--workers", "2"]) == 0
    assert s1.read_bytes() == s2.read_bytes()
    cols, rows = read_csv(s1)
    assert len(rows) == 3 and cols[0] == "run"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "lpnse", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
