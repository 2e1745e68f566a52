import json
import os

import pytest

from remlab.cli import config_hash, main, resolve_config


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1]) if out else None


def body(path):
    with open(path) as fh:
        return [l for l in fh if not l.startswith("# generated=")]


def test_scales_command(tmp_path, capsys):
    code, msg = run_cli(capsys, "scales", "--n", "10,12", "--out", str(tmp_path))
    assert code == 0
    with open(msg["summary"]) as fh:
        doc = json.load(fh)
    assert doc["exit_status"] == 0
    assert set(doc["result"]) == {"10", "12"}
    assert all(a["pass"] for a in doc["audits"] if a["kind"] == "exact")


def test_csv_bodies_are_reproducible(tmp_path, capsys):
    args = ("simulate", "--n", "8", "--beta", "1.0", "--horizon", "20", "--seed", "3",
            "--override")
    run_cli(capsys, *args, "--out", str(tmp_path / "a"))
    run_cli(capsys, *args, "--out", str(tmp_path / "b"), "--threads", "2")
    a = [os.path.join(r, f) for r, _, fs in os.walk(tmp_path / "a") for f in fs if f.endswith(".csv")]
    b = [os.path.join(r, f) for r, _, fs in os.walk(tmp_path / "b") for f in fs if f.endswith(".csv")]
    assert a and len(a) == len(b)
    for pa, pb in zip(sorted(a), sorted(b)):
        assert body(pa) == body(pb)
        assert body(pa)[0].startswith("# config_hash=")


def test_invalid_regime_needs_override(tmp_path, capsys):
    code, msg = run_cli(capsys, "landscape", "--n", "10", "--out", str(tmp_path))
    assert code == 1 and msg["error"] == "DomainError"
    code, _ = run_cli(capsys, "landscape", "--n", "10", "--override", "--top-rule", "refined",
                      "--out", str(tmp_path))
    assert code == 0


def test_valid_landscape(tmp_path, capsys):
    code, msg = run_cli(capsys, "landscape", "--n", "16", "--epsilon", "1.0", "--out",
                        str(tmp_path))
    assert code == 0
    doc = json.load(open(msg["summary"]))
    assert any(a["name"] == "n=16:inclusion_chain" and a["pass"] for a in doc["audits"])


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run_cli(capsys, "sweep", "--axis", "n", "--values", "", "--out", str(tmp_path))[0] == 1
    assert run_cli(capsys, "scales", "--n", "ten")[0] == 1
    assert run_cli(capsys, "scales", "--epsilon", "2.0", "--out", str(tmp_path))[0] == 1


def test_spectral_command(tmp_path, capsys):
    code, msg = run_cli(capsys, "spectral", "--n", "8", "--override", "--top-rule", "refined",
                        "--out", str(tmp_path))
    assert code == 0
    doc = json.load(open(msg["summary"]))
    assert doc["result"]["8"]["poincare_bound"] >= doc["result"]["8"]["inverse_gap"]


def test_strict_mode_turns_failed_audits_into_exit_two(tmp_path, capsys):
    # theta_n = 1 sits outside the block-length window, an asymptotic audit
    args = ("scales", "--n", "10", "--out", str(tmp_path))
    assert run_cli(capsys, *args)[0] == 0
    assert run_cli(capsys, *args, "--strict")[0] == 2


def test_verify_aging_suite(tmp_path, capsys):
    code, msg = run_cli(capsys, "verify", "--n", "8,10", "--suite", "aging", "--replicas", "300",
                        "--panel", "2", "--override", "--top-rule", "refined",
                        "--out", str(tmp_path))
    assert code == 0
    doc = json.load(open(msg["summary"]))
    assert any(a["name"].startswith("trend:") for a in doc["audits"])


def test_sweep(tmp_path, capsys):
    code, msg = run_cli(capsys, "sweep", "--axis", "n", "--values", "8,10",
                        "--sweep-command", "scales", "--out", str(tmp_path))
    assert code == 0
    d = os.path.dirname(msg["summary"])
    assert os.path.exists(os.path.join(d, "sweep_n.csv"))


def test_config_file_and_hash(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 9, "epsilon": 0.5}))
    cfg = resolve_config(["scales", "--config", str(cfg_file), "--seed", "4"])
    assert cfg["seed"] == 4 and cfg["epsilon"] == 0.5
    other = dict(cfg, out="elsewhere", threads=8)
    assert config_hash(cfg) == config_hash(other)
    assert config_hash(cfg) != config_hash(dict(cfg, seed=5))
