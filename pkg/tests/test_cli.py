import json

import pytest

from physpoof import cli


def _run(tmp_path, *argv):
    return cli.run(list(argv))


def test_gen_writes_datasets_and_provenance(tmp_path):
    out = tmp_path / "gen"
    code = cli.run(["gen", "--N", "4", "--n1", "8", "--train-size", "50", "--test-size", "10",
                    "--snr-db", "5", "--out", str(out)])
    assert code == 0
    run = json.loads((out / "run.json").read_text())
    assert run["command"] == "gen" and run["seed"] == 0
    assert run["config"]["N"] == 4 and run["config"]["snr_db"] == 5.0
    assert set(run["versions"]) >= {"python", "numpy", "physpoof"}
    assert (out / "train" / "manifest.json").exists() and (out / "test" / "data.f32le").exists()


def test_global_flags_after_subcommand(tmp_path):
    out = tmp_path / "g"
    assert cli.run(["gen", "--profile", "desk", "--n", "4", "--n1", "8", "--train-size", "20",
                    "--test-size", "5", "--seed", "3", "--out", str(out)]) == 0
    assert json.loads((out / "run.json").read_text())["seed"] == 3


def test_caf_is_deterministic(tmp_path):
    args = ["caf", "--case", "table1-1", "--M", "4000", "--max-lag", "200", "--seed", "1"]
    assert cli.run(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.run(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "caf.csv").read_bytes() == (tmp_path / "b" / "caf.csv").read_bytes()
    res = json.loads((tmp_path / "a" / "run.json").read_text())["results"]
    assert res["spacing_s"] == pytest.approx(64e-6, rel=0.02)
    assert len(res["ambiguity_set"]) == 3


def test_precedence_flags_over_file_over_defaults(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"N": 6, "n1": 12, "snr_db": 3.0}))
    out = tmp_path / "p"
    assert cli.run(["gen", "--config", str(conf), "--n1", "16", "--train-size", "10",
                    "--test-size", "5", "--out", str(out)]) == 0
    cfg = json.loads((out / "run.json").read_text())["config"]
    assert cfg["N"] == 6 and cfg["n1"] == 16 and cfg["snr_db"] == 3.0
    assert cfg["modulation"] == cli.DEFAULTS["gen"]["modulation"]


def test_invalid_input_exits_1(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"colour": "red"}))
    assert cli.run(["gen", "--config", str(conf), "--out", str(tmp_path / "x")]) == 1
    assert cli.run(["gen", "--bogus", "1"]) == 1
    assert cli.run([]) == 1
    assert cli.run(["caf", "--case", "table9-1", "--out", str(tmp_path / "y")]) == 1
    assert cli.run(["gen", "--N", "0", "--out", str(tmp_path / "z")]) == 1
    assert "error" in capsys.readouterr().err


def test_runtime_failure_exits_2(tmp_path):
    assert cli.run(["traverse", "--vae", str(tmp_path / "missing"), "--data", str(tmp_path),
                    "--out", str(tmp_path / "t")]) == 2


def test_spoof_eval_oracle(tmp_path):
    out = tmp_path / "s"
    assert cli.run(["spoof-eval", "--N", "4", "--n1", "8", "--n-frames", "50",
                    "--eb-n0-db", "[0, 4]", "--out", str(out)]) == 0
    lines = (out / "ber.csv").read_text().splitlines()
    assert lines[0] == "eb_n0_db,ber,ci_low,ci_high" and len(lines) == 3
