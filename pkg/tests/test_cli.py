import csv
import hashlib
import io
import json
import subprocess
import sys

import pytest

from stakesim.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, main

SIM = {
    "version": 1,
    "preset": "neucoin",
    "params": {"block_time_target": 16, "modifier_interval": 16, "selection_interval": 64,
               "min_stake_age": 96},
    "nodes": [{"name": "a", "stake": 10**9, "splits": 3}, {"name": "b", "stake": 10**9}],
    "duration": 2000,
    "latency": {"kind": "lognormal", "median": 2.0, "sigma": 0.5},
    "warmup_blocks": 10,
    "record_trace": True,
}

ATTACK = {"attack": {"kind": "double_spend", "p": 0.1, "n_conf": 1, "trials": 2000}}


@pytest.fixture
def write_json(tmp_path):
    def write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


def test_table1_csv(capsys):
    assert main(["analytic", "table1"]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 8 and all(len(r) == 9 for r in rows)


def test_table1_even_split_row(capsys):
    assert main(["analytic", "table1", "--p", "0.5"]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2
    row = dict(zip(rows[0], rows[1]))
    assert [float(row[f"n={n}"]) for n in (1, 10, 60, 120)] == [1.0] * 4
    assert [float(row[f"log10_n={n}"]) for n in (1, 10, 60, 120)] == [0.0] * 4


def test_grind_threshold(capsys):
    assert main(["analytic", "grind-threshold", "--tmod", "200"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("p* = ")
    assert float(out.split("=")[1]) == pytest.approx(0.31, abs=0.02)


@pytest.mark.parametrize("argv", [
    ["analytic", "catchup", "--p", "0.1,0.2", "--lag", "60"],
    ["analytic", "pmf", "--p", "0.2"],
    ["analytic", "grind-curve", "--p", "0.2,0.3"],
])
def test_other_series(argv, capsys):
    assert main(argv) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) > 1 and len({len(r) for r in rows}) == 1


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["simulate", "--config", "x.json"],  # no seed
    ["simulate", "--seed", "1"],  # no config
    ["simulate", "--seed", "-1", "--config", "x.json"],
    ["analytic", "table1", "--p", "1.5"],
    ["analytic", "grind-threshold", "--target", "2"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_config_errors(write_json, tmp_path, capsys):
    bad = write_json("bad.json", {**SIM, "nodes": [{"name": "a", "stake": 0}]})
    assert main(["simulate", "--seed", "1", "--config", bad]) == EXIT_CONFIG
    assert "nodes/0/stake" in capsys.readouterr().err
    extra = write_json("extra.json", {**SIM, "colour": "blue"})
    assert main(["simulate", "--seed", "1", "--config", extra]) == EXIT_CONFIG
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["attack", "--seed", "1", "--config", str(broken)]) == EXIT_CONFIG
    assert main(["attack", "--seed", "1", "--config", str(tmp_path / "missing.json")]) \
        == EXIT_CONFIG
    inconsistent = write_json("inc.json", {**SIM, "params": {"min_stake_age": 10}})
    assert main(["simulate", "--seed", "1", "--config", inconsistent]) == EXIT_CONFIG
    short = write_json("short.json", {**SIM, "duration": 10})
    assert main(["simulate", "--seed", "1", "--config", short]) == EXIT_CONFIG


def test_attack_with_static_grinding_is_config_error(write_json):
    doc = {"preset": "peercoin", "attack": {"kind": "grinding", "p": 0.2, "lag_blocks": 3,
                                            "trials": 10}}
    assert main(["attack", "--seed", "1", "--config", write_json("g.json", doc)]) == EXIT_CONFIG


def test_attack_outcome(write_json, tmp_path, capsys):
    out = tmp_path / "run"
    cfg = write_json("attack.json", ATTACK)
    assert main(["attack", "--seed", "7", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert "double_spend:" in capsys.readouterr().out
    outcome = json.loads((out / "outcome.json").read_text())
    assert outcome["trials"] == 2000
    assert outcome["ci_low"] <= 0.2046 <= outcome["ci_high"]


def test_simulate_writes_outputs_and_replays(write_json, tmp_path, capsys):
    out = tmp_path / "sim"
    cfg = write_json("sim.json", SIM)
    argv = ["simulate", "--seed", "3", "--config", cfg, "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert "fork_rate=" in capsys.readouterr().out
    names = {p.name for p in out.iterdir()}
    assert names == {"result.json", "chain.jsonl", "trace.jsonl.gz", "manifest.json"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3 and "--out" not in manifest["argv"]
    for name, digest in manifest["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    again = tmp_path / "again"
    assert main(["replay", str(out / "manifest.json"), "--out", str(again), "--check"]) \
        == EXIT_OK
    for name in manifest["outputs"]:
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_replay_detects_changed_config(write_json, tmp_path):
    out = tmp_path / "a"
    cfg = write_json("attack.json", ATTACK)
    assert main(["attack", "--seed", "1", "--config", cfg, "--out", str(out)]) == EXIT_OK
    write_json("attack.json", {"attack": {**ATTACK["attack"], "p": 0.2}})
    assert main(["replay", str(out / "manifest.json")]) == EXIT_CONFIG


def test_replay_check_detects_tampered_output(write_json, tmp_path):
    out = tmp_path / "a"
    cfg = write_json("attack.json", ATTACK)
    assert main(["attack", "--seed", "1", "--config", cfg, "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["outputs"]["outcome.json"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(manifest))
    assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "b"),
                 "--check"]) == EXIT_INVARIANT


def test_simulate_curve(write_json, tmp_path):
    doc = {**SIM, "record_trace": False, "curve": {"block_times": [8, 32], "measured_blocks": 100}}
    out = tmp_path / "curve"
    assert main(["simulate", "--seed", "1", "--config", write_json("c.json", doc),
                 "--out", str(out)]) == EXIT_OK
    lines = (out / "curve.csv").read_text().splitlines()
    assert lines[0] == "block_time,fork_rate,orphans,total_blocks"
    assert [line.split(",")[0] for line in lines[1:]] == ["8", "32"]


def test_modifier_trace(capsys):
    assert main(["modifier-trace", "--seed", "2", "--intervals", "3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("mode,interval_start,modifier")
    assert len(lines) == 4


def test_set_overrides_preset(tmp_path, capsys):
    assert main(["analytic", "pmf", "--p", "0.2", "--preset", "peercoin",
                 "--set", "modifier_interval=1200", "--set", "block_time_target=60"]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) > 10
    assert main(["analytic", "pmf", "--p", "0.2", "--set", "nonsense=1"]) == EXIT_CONFIG


@pytest.mark.parametrize("kind", ["simulate", "attack", "modifier-trace"])
def test_schema_command(kind, capsys):
    assert main(["schema", kind]) == EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert schema["type"] == "object" and schema["additionalProperties"] is False


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "stakesim", "--version"], capture_output=True,
                       text=True, check=False)
    assert r.returncode == 0 and r.stdout.startswith("stakesim ")
