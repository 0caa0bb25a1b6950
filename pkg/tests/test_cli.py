import json
import subprocess
import sys

import pytest

from diffgof.cli import main, parse_and_validate
from diffgof.config import command_from_json, command_to_json


def run(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "diffgof", *map(str, args)], capture_output=True,
                          text=True, cwd=cwd)


def assert_error(proc, code, fragment):
    assert proc.returncode == code, proc.stderr
    lines = proc.stderr.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("error:"), proc.stderr
    assert fragment in lines[0]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("simulate", "--model", "simple:ou", "--T", 200, "--seed", 1,
               "--out", d / "ou.csv").returncode == 0
    assert run("calibrate", "--law", "int_w2", "--eps", "0.05,0.1", "--n", 2000, "--seed", 0,
               "--out", d / "w2.json").returncode == 0
    return d


def test_simulate_writes_csv(workdir):
    text = (workdir / "ou.csv").read_text().splitlines()
    assert text[0] == "t,x" and len(text) == 20_002


def test_simulate_family_needs_theta(tmp_path):
    assert_error(run("simulate", "--model", "family:gamma=1", "--T", 10, "--seed", 0,
                     "--out", tmp_path / "p.csv"), 2, "--theta")
    ok = run("simulate", "--model", "family:gamma=1", "--theta", "0.5,1", "--T", 10, "--seed", 0,
             "--x0", 0.1, "--out", tmp_path / "p.csv")
    assert ok.returncode == 0
    first = (tmp_path / "p.csv").read_text().splitlines()[1].split(",")
    assert float(first[0]) == 0.0 and float(first[1]) == 0.1


def test_simulate_is_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        run("simulate", "--model", "simple:cubic", "--T", 20, "--seed", 5, "--out", tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_calibrate_output(workdir):
    data = json.loads((workdir / "w2.json").read_text())
    assert data["law_id"] == "int_w2" and data["version"] == 1
    assert data["thresholds"][0] > data["thresholds"][1]


def test_test_with_table(workdir):
    proc = run("test", "--traj", workdir / "ou.csv", "--stat", "ADF", "--model", "simple:ou",
               "--table", workdir / "w2.json", "--eps", 0.05)
    assert proc.returncode == 0, proc.stderr
    verdict = json.loads(proc.stdout)
    assert {"statistic", "threshold", "decision", "law_id"} <= set(verdict)
    assert verdict["decision"] in ("Accept", "Reject")
    assert verdict["decision"] == ("Reject" if verdict["statistic"] > verdict["threshold"] else "Accept")


def test_test_composite_autocalibrates(tmp_path):
    path = tmp_path / "p.csv"
    run("simulate", "--model", "family:gamma=1", "--theta", "0,1", "--T", 100, "--seed", 2, "--out", path)
    proc = run("test", "--traj", path, "--stat", "ParamEDF:CvM", "--model", "family:gamma=1",
               "--eps", 0.05, "--calibration-n", 1000)
    assert proc.returncode == 0, proc.stderr
    verdict = json.loads(proc.stdout)
    assert verdict["law_id"] == "Delta:gamma=1"
    assert len(verdict["theta_hat"]) == 2 and len(verdict["boundary_hit"]) == 2


def test_defaults_dump():
    proc = run("defaults", "--gamma", "0,1,0.5")
    out = json.loads(proc.stdout)
    assert out["defaults"]["dt"] == 0.01 and out["defaults"]["grid_points"] == 400
    assert set(out["limit_grids"]) == {"0", "1"}
    assert {"L", "dz", "m_y"} == set(out["limit_grids"]["1"])


@pytest.mark.parametrize("args,fragment", [
    (["test", "--traj", "{ou}", "--stat", "ParamEDF:CvM", "--model", "family:gamma=0.5",
      "--eps", "0.05"], "unsupported regime gamma=0.5"),
    (["test", "--traj", "{ou}", "--stat", "ADF", "--model", "simple:ou", "--eps", "0.05",
      "--no-autocalibrate"], "--table"),
    (["test", "--traj", "{ou}", "--stat", "KSIncrement", "--model", "simple:ou",
      "--table", "{w2}", "--eps", "0.05"], "sup_abs_w"),
    (["test", "--traj", "{ou}", "--stat", "ADF", "--model", "simple:ou",
      "--table", "{w2}", "--eps", "0.2"], "0.2"),
    (["test", "--traj", "missing.csv", "--stat", "ADF", "--model", "simple:ou", "--eps", "0.05"],
     "not found"),
    (["test", "--traj", "{ou}", "--stat", "ADF:KS", "--model", "simple:ou", "--eps", "0.05"], "ADF"),
    (["test", "--traj", "{ou}", "--stat", "ParamEDF:CvM", "--model", "simple:ou", "--eps", "0.05"],
     "family model"),
    (["calibrate", "--law", "int_w2", "--eps", "0.01", "--n", "1000", "--seed", "0", "--out", "x.json"],
     "too small"),
    (["calibrate", "--law", "Delta:gamma=0.5", "--eps", "0.1", "--n", "1000", "--seed", "0",
      "--out", "x.json"], "unsupported regime"),
    (["calibrate", "--law", "delta_S0:abc", "--eps", "0.1", "--n", "1000", "--seed", "0",
      "--out", "x.json"], "--model"),
    (["simulate", "--model", "simple:quartic", "--T", "1", "--seed", "0", "--out", "x.csv"], "quartic"),
    (["simulate", "--model", "simple:ou", "--T", "-1", "--seed", "0", "--out", "x.csv"], "-1"),
    (["simulate", "--model", "simple:ou", "--T", "1", "--seed", "0", "--out", "/no/such/dir/x.csv"],
     "does not exist"),
    (["study", "--config", "missing.json", "--out", "r"], "not found"),
    (["frobnicate"], "invalid choice"),
    (["defaults", "--bogus"], "unrecognized"),
    ([], "required"),
])
def test_validation_errors(workdir, args, fragment):
    args = [a.format(ou=workdir / "ou.csv", w2=workdir / "w2.json") for a in args]
    assert_error(run(*args, cwd=workdir), 2, fragment)


def test_numerical_failure_exit_code(tmp_path):
    # x^3 drift with a coarse step from a far start overflows the Euler scheme
    proc = run("simulate", "--model", "family:gamma=3", "--theta", "0,3", "--T", 5, "--dt", 0.5,
               "--seed", 0, "--x0", 50, "--out", tmp_path / "p.csv")
    assert_error(proc, 3, "non-finite state at step")


def test_in_process_main_matches(workdir, capsys):
    code = main(["test", "--traj", str(workdir / "ou.csv"), "--stat", "ADF", "--model", "simple:ou",
                 "--table", str(workdir / "w2.json"), "--eps", "0.1"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["epsilon"] == 0.1


def test_command_roundtrip_through_parser(workdir):
    cmd = parse_and_validate(["test", "--traj", str(workdir / "ou.csv"), "--stat", "ADF",
                              "--model", "simple:ou", "--table", str(workdir / "w2.json"),
                              "--eps", "0.05"])
    assert command_from_json(command_to_json(cmd)) == cmd
    cmd = parse_and_validate(["calibrate", "--law", "int_w2", "--eps", "0.1,0.05", "--n", "1000",
                              "--seed", "3", "--out", str(workdir / "x.json")])
    assert command_from_json(command_to_json(cmd)) == cmd
