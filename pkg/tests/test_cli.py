import json
import math
import subprocess
import sys

import pytest

from crwalk.bellman import ValueTable
from crwalk.cli import main, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_tfe_constant_potential(capsys):
    code, out, _ = run(capsys, "tfe", "--env", "periodic:0.3", "--beta", "1", "--theta", "1")
    assert code == 0
    d = json.loads(out)
    assert d["lambda"] == pytest.approx(0.3 + math.log(math.cosh(1)), abs=1e-11)
    assert d["flat"] is False


def test_tfe_two_periodic_at_zero_tilt(capsys):
    code, out, _ = run(capsys, "tfe", "--env", "periodic:0,1", "--beta", "1", "--theta", "0",
                       "--method", "implicit")
    d = json.loads(out)
    assert code == 0 and d["flat"] is True and d["lambda"] == pytest.approx(0.5)


def test_missing_beta_is_usage_error(capsys):
    code, _, err = run(capsys, "tfe", "--env", "periodic:0,1", "--theta", "1")
    assert code == 1 and "--beta" in err


def test_bad_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "tfe", "--bogus")
    assert code == 1 and "usage" in err


def test_grid_parsing():
    assert parse_grid("0:1:0.25").tolist() == [0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(Exception):
        parse_grid("0:1:0")


def test_effham_csv_with_negative_grid(capsys):
    code, out, _ = run(capsys, "effham", "--env", "iid:p=0.5,half_width=3000", "--beta", "1",
                       "--delta", "1", "--theta-grid", "-2:2:1")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "theta,K_delta,H_bar,regime"
    assert len(lines) == 6 and all(l.endswith(",full") for l in lines[1:])


def test_effham_no_control_matches_tfe(capsys):
    _, out, _ = run(capsys, "effham", "--env", "periodic:0,1", "--beta", "1", "--delta", "0",
                    "--theta", "1.5", "--format", "json")
    h = json.loads(out)["H_bar"]
    _, out, _ = run(capsys, "tfe", "--env", "periodic:0,1", "--beta", "1", "--theta", "1.5")
    assert h == json.loads(out)["lambda"]


def test_bellman_and_simulate(capsys, tmp_path):
    env = "iid:p=0.5,half_width=2000"
    dump = tmp_path / "u.bin"
    code, out, _ = run(capsys, "bellman", "--env", env, "--beta", "1", "--delta", "0.5",
                       "--theta", "1", "--n", "300", "--dump", str(dump))
    opt = json.loads(out)["value"]
    assert code == 0
    k, lo, hi, vals = ValueTable.load_slice(dump)
    assert (k, lo, hi) == (300, 0, 0) and vals[0] == pytest.approx(opt, rel=1e-11)
    code, out, _ = run(capsys, "simulate", "--env", env, "--beta", "1", "--delta", "0.5",
                       "--theta", "1", "--n", "300", "--policy", "march-left")
    d = json.loads(out)
    assert code == 0 and d["value"] >= opt - 1e-9 and d["excess"] >= -1e-9


def test_bellman_without_control_matches_direct_tfe(capsys):
    env = "iid:p=0.5,half_width=1000"
    _, out, _ = run(capsys, "bellman", "--env", env, "--beta", "1", "--delta", "0",
                    "--theta", "0.7", "--n", "400")
    b = json.loads(out)["value_per_step"]
    _, out, _ = run(capsys, "tfe", "--env", env, "--beta", "1", "--theta", "0.7",
                    "--method", "direct-dp", "--n", "400")
    assert b == pytest.approx(json.loads(out)["lambda"], abs=1e-10)


def test_window_too_small_is_numerical_failure(capsys):
    code, _, err = run(capsys, "bellman", "--env", "iid:p=0.5,half_width=10", "--beta", "1",
                       "--delta", "0.5", "--theta", "1", "--n", "50")
    assert code == 2 and "window-too-small" in err


def test_excursion(capsys):
    code, out, _ = run(capsys, "excursion", "--c", "1", "--ell", "20", "--m", "50")
    d = json.loads(out)
    assert code == 0 and abs(d["J_ell"] - math.log(math.cosh(1))) < 1e-3


def test_verify_walk_suite(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "walk")
    assert code == 0 and "FAIL" not in out


def test_verify_deterministic(capsys):
    _, first, _ = run(capsys, "verify", "--suite", "all", "--seed", "7")
    _, second, _ = run(capsys, "verify", "--suite", "all", "--seed", "7")
    assert first == second


def test_verify_tampered_tolerance_fails(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "effham", "--tol-scale", "-1")
    assert code != 0 and "FAIL" in out


def test_unknown_suite(capsys):
    code, _, _ = run(capsys, "verify", "--suite", "nope")
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "crwalk", "excursion", "--c", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["J"] == pytest.approx(math.log(math.cosh(0.5)), abs=1e-11)
