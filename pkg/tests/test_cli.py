import json
import subprocess
import sys

import pytest

from vectorhost.cli import main
from vectorhost.solver import read_trajectory_csv
from vectorhost.sweep import read_table

FAST = ["--N", "10", "--dt", "0.01"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_r0_parametric_json(capsys):
    code, out, _ = run(capsys, "r0", "--family", "parametric", "--p", "0.5,0.5,0.5,0.5",
                       "--q", "0,0,0,0", *FAST)
    assert code == 0
    d = json.loads(out)
    assert d["R0"] > 1 and d["sign_check"] == "sign(R0-1) = sign(-lambda)"
    assert d["schema_version"] == 1


def test_r0_family_alias_csv(capsys):
    code, out, _ = run(capsys, "r0", "--family", "section5", "--p", "0.5,0.5,0.5,0.5",
                       "--q", "0,0,0,0", *FAST, "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "quantity,value" and [ln.split(",")[0] for ln in lines[1:]] == ["R01", "R02", "R0"]


def test_eigen_constant(capsys):
    code, out, _ = run(capsys, "eigen", "--family", "constant", "--params", "2,1,1,3,3,1,1,2", *FAST)
    d = json.loads(out)
    assert code == 0 and d["zeta1"] == pytest.approx(-1.0, rel=1e-3)


def test_verify_constant_pass_and_fail(capsys):
    code, out, _ = run(capsys, "verify-constant", "--params", "2,1,1,3,3,1,1,2", *FAST)
    d = json.loads(out)
    assert code == 0 and d["pass"] and d["regime"] == "ENDEMIC"
    code, out, _ = run(capsys, "verify-constant", "--params", "2,1,1,3,3,1,1,2", *FAST,
                       "--tolerance", "1e-12")
    assert code == 1 and not json.loads(out)["pass"]


def test_simulate_csv_roundtrip(capsys, tmp_path):
    p = tmp_path / "traj.csv"
    code, _, _ = run(capsys, "simulate", "--family", "constant", "--params", "2,1,1,3,3,1,1,2",
                     *FAST, "--t-end", "0.1", "--init", "1;0.1;1;0.1*x", "--format", "csv",
                     "--out", str(p), "--save-every", "5")
    assert code == 0
    cols = read_trajectory_csv(p)
    assert len(cols["t"]) == 3 * 11 and cols["vi"].max() > 0


def test_periodic_host(capsys):
    code, out, _ = run(capsys, "periodic", "--family", "constant", "--params", "2,1,1,3,3,1,1,2",
                       *FAST, "--system", "host", "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["mean"]["H"] == pytest.approx(1.0, abs=1e-7)


def test_periodic_csv_needs_out(capsys, tmp_path):
    argv = ["periodic", "--family", "parametric", *FAST, "--system", "vector"]
    assert run(capsys, *argv)[0] == 2
    p = tmp_path / "orbit.csv"
    assert run(capsys, *argv, "--out", str(p))[0] == 0
    assert p.read_text().splitlines()[0] == "t,x,V"


def test_sweep_cli(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", "--vary", "p1:0:0.5:2", "--link", "q1=-p1",
                     "--outputs", "R0,lambda", *FAST, "--workers", "1", "--out", str(out))
    assert code == 0
    t = read_table(out)
    assert len(t) == 2 and all(r["status"] == "ok" for r in t.rows)
    meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
    assert meta["spec"]["linked"] == {"q1": ["p1", -1.0]}


def test_dynamics_check_cli(capsys):
    code, out, _ = run(capsys, "dynamics-check", "--family", "constant",
                       "--params", "1,2,1,3,3,1,1,2", *FAST, "--init", "1;0.1;1;0.1",
                       "--horizon", "100")
    d = json.loads(out)
    assert code == 0 and d["predicted_case"] == "3a" and d["verdict"] == "pass"


@pytest.mark.parametrize("argv,code", [
    (["r0", "--family", "parametric", "--p", "0.5,0.5"], 3),
    (["r0", "--family", "parametric", "--p", "2,0,0,0"], 3),
    (["r0", "--family", "constant"], 3),
    (["r0"], 3),
    (["r0", "--family", "parametric", "--dt", "0.3"], 4),
    (["r0", "--family", "parametric", "--N", "2"], 4),
    (["simulate", "--family", "parametric", "--t-end", "1", "--init", "1;2"], 3),
    (["r0", "--family", "parametric", "--config", "/nonexistent.json"], 3),
])
def test_error_exit_codes(capsys, argv, code):
    got, _, err = run(capsys, *argv)
    assert got == code
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["exit_code"] == code and rec["message"]


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["r0", "--bogus"])
    assert exc.value.code == 2
    rec = json.loads(capsys.readouterr().err.splitlines()[0])
    assert rec["error"] == "usage"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "vectorhost", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "dynamics-check" in res.stdout
