import csv
import json
import re
import shlex
import shutil
from pathlib import Path

import pytest

from dynhtm.cli import build_parser, main
from dynhtm.io import fmt

ROOT = Path(__file__).resolve().parents[1]


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def small_lorenz(tmp_path, **system):
    return write_config(tmp_path / "cfg.json", {"system": {"n_steps": 1000, **system}})


def test_generate_writes_n_plus_one_rows(tmp_path):
    out = tmp_path / "run"
    assert main(["generate", "--config", small_lorenz(tmp_path), "--out", str(out)]) == 0
    with (out / "trajectory.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "t", "x", "y", "z"]
    assert len(rows) - 1 == 1001
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"trajectory.csv", "series.csv"}
    assert manifest["config"]["forecast"]["kn"] == 8
    assert json.loads((out / "config.json").read_text()) == manifest["config"]


def test_numeric_output_round_trips(tmp_path):
    out = tmp_path / "run"
    main(["generate", "--config", small_lorenz(tmp_path), "--out", str(out)])
    with (out / "trajectory.csv").open() as fh:
        row = list(csv.reader(fh))[500]
    assert row[0] == "499"
    assert all(fmt(float(v)) == v for v in row[1:])


def test_identical_runs_are_byte_identical(tmp_path):
    cfg = small_lorenz(tmp_path)
    for name in ("a", "b"):
        assert main(["generate", "--config", cfg, "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for f in ("trajectory.csv", "series.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    # manifests differ only in the recorded output directory
    a, b = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in "ab")
    assert a["outputs"] == b["outputs"]
    a["config"]["io"]["out"] = b["config"]["io"]["out"]
    assert a == b


def test_seed_flag_changes_noise(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"system": {"n_steps": 200}, "observation": {"noise_std": 1.0}})
    main(["generate", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "a")])
    main(["generate", "--config", cfg, "--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert (tmp_path / "a" / "series.csv").read_bytes() != (tmp_path / "b" / "series.csv").read_bytes()


def test_jsonl_format(tmp_path):
    out = tmp_path / "run"
    assert main(["generate", "--config", small_lorenz(tmp_path), "--format", "jsonl", "--out", str(out)]) == 0
    lines = (out / "series.jsonl").read_text().splitlines()
    assert len(lines) == 1001
    assert set(json.loads(lines[0])) == {"step", "t", "value"}


def test_config_error_exits_2_naming_path(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.json", {"system": {"rho": "abc"}})
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "system.rho" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main([]) == 2
    assert main(["generate", "--format", "xml"]) == 2
    assert main(["generate", "--config", str(tmp_path / "missing.json")]) == 2
    capsys.readouterr()


def test_forecast_horizon_beyond_data_exits_1(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "f.json",
        {"system": {"n_steps": 300}, "embedding": {"tau": 5, "k": 3}, "forecast": {"horizon": 5000}},
    )
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "5000" in err


def test_input_series_is_digested(tmp_path):
    gen = tmp_path / "gen"
    main(["generate", "--config", small_lorenz(tmp_path, n_steps=2000), "--out", str(gen)])
    cfg = write_config(tmp_path / "e.json", {"io": {"input": str(gen / "series.csv")}, "embedding": {"tau": 10, "k": 3}})
    out = tmp_path / "emb"
    assert main(["embed", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert list(manifest["inputs"].values()) == [json.loads((gen / "manifest.json").read_text())["outputs"]["series.csv"]]
    with (out / "cloud.csv").open() as fh:
        assert sum(1 for _ in fh) - 1 == 2001 - 20


def test_replay_reproduces_and_detects_tampering(tmp_path, capsys):
    out = tmp_path / "run"
    main(["generate", "--config", small_lorenz(tmp_path), "--out", str(out)])
    assert main(["replay", str(out / "manifest.json")]) == 0
    (out / "series.csv").write_text("tampered\n")
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["outputs"]["series.csv"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(manifest))
    assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 1
    assert "series.csv" in capsys.readouterr().err


def test_every_command_has_help():
    text = build_parser().format_help()
    for name in ("generate", "embed", "forecast", "regimes", "causality", "htm", "replay"):
        assert name in text


def readme_commands():
    text = (ROOT / "README.md").read_text()
    blocks = re.findall(r"```sh\n(.*?)```", text, re.S)
    return [line for block in blocks for line in block.splitlines() if line.startswith("dynhtm ")]


def test_readme_examples_run(tmp_path, monkeypatch, capsys):
    commands = readme_commands()
    assert len(commands) >= 6
    shutil.copytree(ROOT / "configs", tmp_path / "configs")
    monkeypatch.chdir(tmp_path)
    for cmd in commands:
        assert main(shlex.split(cmd)[1:]) == 0, cmd
    capsys.readouterr()


@pytest.mark.parametrize("name", ["lorenz", "switch", "logistic", "htm", "estimate"])
def test_shipped_configs_parse(name):
    from dynhtm.config import parse_config

    parse_config((ROOT / "configs" / f"{name}.json").read_text())
