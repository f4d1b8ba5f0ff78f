import csv
import io
import json
from importlib import resources

import pytest

from platformtrial.cli import main

CONFIGS = resources.files("platformtrial.configs")


def cfg(name):
    return str(CONFIGS.joinpath(name))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_design_json_and_reingest(capsys, tmp_path):
    code, out, _ = run(capsys, "design", "--config", cfg("flair_pairwise.json"), "--format", "json")
    assert code == 0
    rec = json.loads(out)
    assert rec["n"] == 76
    saved = tmp_path / "design.json"
    saved.write_text(json.dumps({"design": rec}))
    code, again, _ = run(capsys, "design", "--config", str(saved), "--format", "json")
    assert code == 0 and json.loads(again) == rec


def test_design_text_and_out_file(capsys, tmp_path):
    target = tmp_path / "d.txt"
    code, out, _ = run(capsys, "design", "--config", cfg("single_stage.json"), "--out", str(target))
    assert code == 0 and out == ""
    assert "115" in target.read_text()


def test_oc_csv(capsys):
    code, out, _ = run(capsys, "oc", "--config", cfg("flair_pairwise.json"), "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    clin = next(r for r in rows if r["scenario"] == "clin_clin")
    assert float(clin["expected_n"]) == pytest.approx(420.6, abs=0.5)


def test_simulate_small(capsys, tmp_path):
    conf = json.loads(CONFIGS.joinpath("flair_simulate.json").read_text())
    conf["simulate"]["replicates"] = 20_000
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(conf))
    code, out, _ = run(capsys, "simulate", "--config", str(path), "--format", "json", "--seed", "5")
    assert code == 0
    first = json.loads(out)
    code, out2, _ = run(capsys, "simulate", "--config", str(path), "--format", "json", "--seed", "5",
                        "--threads", "2")
    assert json.loads(out2) == first


def test_reproduce_table1(capsys):
    code, out, _ = run(capsys, "reproduce", "table1")
    assert code == 0
    assert "MISMATCH" not in out


@pytest.mark.parametrize("conf, message", [
    ({"n_arms": 2}, "missing"),
    ({"n_arms": 2, "stages": 2, "alpha": 0.9, "beta": 0.2, "theta_clin": 0.3,
      "boundary_shape": "triangular", "power_mode": "pairwise", "adding_fractions": [0, 1]}, "alpha"),
    ({"n_arms": 2, "stages": 2, "alpha": 0.025, "beta": 0.2, "theta_clin": 0.3,
      "boundary_shape": "hexagonal", "power_mode": "pairwise", "adding_fractions": [0, 1]}, ""),
])
def test_bad_config_exit_code(capsys, tmp_path, conf, message):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(conf))
    code, _, err = run(capsys, "design", "--config", str(path))
    assert code == 2
    assert message in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "design", "--config", str(tmp_path / "nope.json"))
    assert code == 2 and err
