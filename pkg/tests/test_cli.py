import json
import math
import subprocess
import sys

import pytest

from hualab.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, JobSpec, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


def test_jobspec_round_trip():
    job = JobSpec("eval", "rhs", {"n": 2, "family": "group", "lam": [1.0, [0.5, 1.0]]})
    back = JobSpec.from_json(job.dumps())
    assert back == job and back.dumps() == job.dumps()
    assert list(job.to_json()["params"]) == ["family", "lam", "n"]
    assert job.get("missing", 3) == 3


def test_eval_circle(capsys):
    code, rep, _ = run_cli(capsys, "eval", "rhs", "--family", "group", "--group", "u", "--n", "1",
                           "--lambda", "1", "--mu", "1")
    assert code == EXIT_PASS
    assert rep["result"]["value"] == pytest.approx(2.0)
    assert rep["schema"] == 1 and rep["job"]["params"]["lam"] == [1.0]


def test_eval_complex_exponents(capsys):
    code, rep, _ = run_cli(capsys, "eval", "rhs", "--family", "group", "--group", "u", "--n", "1",
                           "--lambda", "0.5+0.25j", "--mu", "0.5")
    assert code == EXIT_PASS
    assert rep["job"]["params"]["lam"] == [[0.5, 0.25]]
    assert rep["result"]["value_imag"] != 0.0


def test_eval_disk_area(capsys):
    code, rep, _ = run_cli(capsys, "eval", "rhs", "--family", "ball-constant", "--group", "u",
                           "--m", "1", "--tau", "1")
    assert code == EXIT_PASS and rep["result"]["value"] == pytest.approx(math.pi)


def test_negative_values_and_domain_errors(capsys):
    code, rep, _ = run_cli(capsys, "eval", "rhs", "--family", "group", "--group", "so", "--n", "3",
                           "--lambda", "-0.2,0.5,-0.4")
    assert code == EXIT_PASS
    code, rep, err = run_cli(capsys, "eval", "rhs", "--family", "group", "--group", "so", "--n", "3",
                             "--lambda", "1,-5,1")
    assert code == EXIT_USAGE and rep is None and "error" in err


@pytest.mark.parametrize("argv", [
    [],
    ["eval"],
    ["eval", "rhs", "--family", "nonsense"],
    ["sample", "haar", "--group", "so"],
    ["verify", "identities", "--group", "gl"],
    ["suite", "--profile", "huge"],
])
def test_usage_errors(capsys, argv):
    assert main(argv) == EXIT_USAGE


def test_sample_haar_is_reproducible(capsys):
    argv = ["sample", "haar", "--group", "sp", "--n", "2", "--count", "3", "--seed", "5"]
    _, a, _ = run_cli(capsys, *argv)
    _, b, _ = run_cli(capsys, *argv)
    assert a == b and len(a["samples"]) == 3
    assert a["samples"][2]["provenance"] == {"seed": 5, "stream_id": 0, "index": 2}


def test_verify_identities(capsys):
    code, rep, _ = run_cli(capsys, "verify", "identities", "--group", "u", "--n", "4", "--trials", "5")
    assert code == EXIT_PASS and rep["pass"] and rep["max_residual"] < 1e-9


def test_verify_integral_writes_files(capsys, tmp_path):
    csv, out = tmp_path / "row.csv", tmp_path / "rep.json"
    code, rep, _ = run_cli(capsys, "verify", "integral", "--family", "group", "--group", "u",
                           "--n", "2", "--lambda", "1,0.5", "--mu", "0.5,0.5", "--samples", "20000",
                           "--seed", "3", "--csv", str(csv), "--out", str(out))
    assert code == EXIT_PASS and rep["pass"]
    assert json.loads(out.read_text()) == rep
    assert csv.read_text().count("\n") == 2


def test_verify_integral_failure_exit(capsys, monkeypatch):
    from hualab import cli
    from hualab.closedform import ClosedFormValue

    argv = ["verify", "integral", "--family", "ball-constant", "--group", "u", "--m", "1",
            "--tau", "1", "--samples", "20000"]
    assert run_cli(capsys, *argv)[0] == EXIT_PASS
    # a wrong reference value (area 3 instead of pi) must turn into exit code 1
    monkeypatch.setattr(cli, "ball_constant", lambda *a: ClosedFormValue(3.0, 0.0, "wrong"))
    code, rep, _ = run_cli(capsys, *argv)
    assert code == EXIT_FAIL and rep["pass"] is False


def test_verify_pickrell(capsys):
    code, rep, _ = run_cli(capsys, "verify", "pickrell", "--lambda-base", "0", "--deviations", "2:1",
                           "--kmax", "6", "--samples", "20000")
    assert code == EXIT_PASS and rep["pass"]
    assert rep["result"]["closed_form"]["value"] == pytest.approx(1.0)


def test_quick_suite_passes_and_catches_fault(capsys, tmp_path):
    csv = tmp_path / "quick.csv"
    code, rep, err = run_cli(capsys, "suite", "--profile", "quick", "--csv", str(csv))
    assert code == EXIT_PASS and rep["pass"]
    assert "FAIL" not in err and err.count("PASS") == len(rep["rows"])
    assert csv.read_text().count("\n") == len(rep["rows"]) + 1
    code, rep, err = run_cli(capsys, "suite", "--profile", "quick", "--inject-fault", "upsilon-sign")
    assert code == EXIT_FAIL and not rep["pass"] and "FAIL" in err


def test_json_is_byte_identical_across_runs_and_threads(tmp_path):
    argv = [sys.executable, "-m", "hualab.cli", "verify", "integral", "--family", "group",
            "--group", "sp", "--n", "2", "--lambda", "1,0.5", "--samples", "8000", "--shards", "4",
            "--seed", "11"]
    outs = []
    for threads in ("1", "1", "4"):
        env = {"HUA_LAB_THREADS": threads, "PATH": "/usr/bin:/bin"}
        res = subprocess.run(argv, capture_output=True, env=env, check=True)
        outs.append(res.stdout)
    assert outs[0] == outs[1] == outs[2]
