import csv
import io
import json
import subprocess
import sys

import pytest

from cliquelab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_lowdeg_closed_form(capsys):
    code, out, _ = run(capsys, "lowdeg", "--n", "100", "--k", "5", "--d", "1")
    report = json.loads(out)
    assert code == 0
    assert report["estimate"] == pytest.approx(0.17589059099337861, abs=1e-12)
    for key in ("experiment", "params", "estimates", "stderrs", "samples", "seed", "elapsed_ms", "version"):
        assert key in report


def test_oracle_csv(capsys):
    code, out, _ = run(capsys, "oracle", "--n", "4", "--k", "1", "--d", "1", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert float(rows[0]["estimates.exact"]) == pytest.approx(0.153093108923949, abs=1e-9)


def test_deterministic_output_is_byte_identical(capsys):
    argv = ["adv", "--n", "60", "--k", "5", "--samples", "2000", "--seed", "3", "--deterministic"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert json.loads(first)["elapsed_ms"] == 0


def test_oracle_cap_is_a_resource_error(capsys):
    code, out, err = run(capsys, "oracle", "--n", "6", "--k", "1", "--d", "1")
    assert code == 4 and out == ""
    assert json.loads(err)["code"] == 4


def test_bad_arguments_exit_3(capsys):
    code, _, err = run(capsys, "lowdeg", "--n", "10", "--k", "20", "--d", "1")
    assert code == 3
    assert json.loads(err)["error"] == "ArgumentError"


def test_missing_seed_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["adv", "--n", "10", "--k", "2"])
    assert exc.value.code == 2


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("CLIQUELAB_OUTPUT_DIR", str(tmp_path))
    _, out, _ = run(capsys, "adv", "--n", "30", "--k", "3", "--samples", "500", "--seed", "9", "--deterministic")
    assert (tmp_path / "adv-9.json").read_text() == out


def test_explicit_output_file(capsys, tmp_path):
    target = tmp_path / "sub" / "r.csv"
    _, out, _ = run(capsys, "lowdeg", "--n", "20", "--k", "2", "--d", "2", "--format", "csv", "--output", str(target))
    assert target.read_text() == out


def test_amplify_default_threshold_never_fires(capsys):
    code, out, _ = run(capsys, "amplify", "--alpha", "0.1", "--beta", "0.2", "--n", "20", "--k", "3",
                       "--samples", "100", "--z-count", "1000", "--y-count", "8", "--seed", "1")
    report = json.loads(out)
    assert code == 0
    assert report["params"]["threshold"] is None and report["params"]["log10_threshold"] > 300
    assert report["estimates"]["adv_B"] == 0.0


def test_hardcore_build_and_eval(capsys, tmp_path):
    poly = tmp_path / "g.poly"
    code, out, _ = run(capsys, "hardcore", "build", "--n", "80", "--k", "2", "--delta", "0.05", "--seed", "1",
                       "--out", str(poly))
    assert code == 0 and poly.exists()
    code, out, _ = run(capsys, "hardcore", "eval", "--solution", str(poly), "--k", "2", "--samples", "2000",
                       "--validation-size", "20000", "--seed", "2")
    assert code == 0
    assert "acceptance_rate" in json.dumps(json.loads(out))


def test_hardcore_gate_failure_exit_code(capsys):
    code, _, err = run(capsys, "hardcore", "build", "--n", "50", "--k", "12", "--delta", "0.01", "--seed", "1")
    assert code == 5
    assert json.loads(err)["error"] == "HardnessGateError"


def test_anticonc_subcommands(capsys):
    code, out, _ = run(capsys, "anticonc", "hyper", "--seed", "1", "--dims", "6", "--d", "2", "--trials", "5")
    assert code == 0 and json.loads(out)["passed"] is True
    code, out, _ = run(capsys, "anticonc", "claim65", "--seed", "1", "--samples", "2000", "--probes", "3")
    assert json.loads(out)["estimates"]["factor"] == pytest.approx(1 / 6)


def test_selftest_detects_the_drop_convention(capsys):
    code, out, _ = run(capsys, "selftest", "--criteria", "1")
    assert code == 0 and json.loads(out)["passed"] is True
    code, out, _ = run(capsys, "selftest", "--criteria", "1", "--drop-convention")
    assert code == 1 and json.loads(out)["passed"] is False


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "cliquelab", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip()
