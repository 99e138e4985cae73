import json
import subprocess
import sys

import pytest

from decmarl.cli import build_parser, config_from_args, main

FAST = ["--episodes", "1", "--max-steps", "10"]


def test_run_writes_all_outputs(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", "--agent-type", "a5", "--difficulty", "hard", "--audit", "--diagnostics",
                 "--out", str(out), *FAST]) == 0
    for name in ("metrics.csv", "episodes.csv", "sessions.csv", "learning_curve.csv",
                 "protocol.json", "config.json", "diagnostics.csv"):
        assert (out / name).exists(), name
    stats = json.loads((out / "protocol.json").read_text())
    assert stats["advisor_param_violations"] == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["difficulty"] == "hard" and cfg["max_steps"] == 10
    assert "R_overall" in capsys.readouterr().out


def test_config_file_then_flags(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("alpha: 0.3\nbeta: 0.2\nepisodes: 7\n")
    args = build_parser().parse_args(["run", "--config", str(f), "--beta", "0.05"])
    cfg = config_from_args(args)
    assert cfg.alpha == 0.3 and cfg.beta == 0.05 and cfg.episodes == 7


@pytest.mark.parametrize("argv", [
    ["run", "--agent-type", "a9"],
    ["run", "--alpha", "2.0", *FAST],
    ["run", "--episodes", "0"],
    ["frobnicate"],
])
def test_configuration_errors_exit_one(argv, tmp_path, capsys):
    assert main([*argv, "--out", str(tmp_path)] if argv[0] == "run" else argv) == 1
    assert "configuration error" in capsys.readouterr().err


def test_unknown_config_key_exits_one(tmp_path):
    f = tmp_path / "c.json"
    f.write_text('{"alhpa": 0.1}')
    assert main(["run", "--config", str(f), "--out", str(tmp_path)]) == 1


def test_runtime_failure_exits_two(tmp_path, monkeypatch):
    from decmarl import cli

    def boom(*a, **k):
        raise RuntimeError("simulated failure")

    monkeypatch.setattr(cli, "run", boom)
    assert main(["run", "--out", str(tmp_path), *FAST]) == 2


def test_matrix_rows(tmp_path):
    out = tmp_path / "m"
    assert main(["matrix", "--env", "base", "--difficulty", "easy", "--scenario", "1", "--scenario", "2",
                 "--agent-type", "a1", "--agent-type", "a4", "--seeds", "2", "--out", str(out), *FAST]) == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 2
    assert (out / "base-easy-s2-a4-seed1" / "episodes.csv").exists()


def test_dump_tables(tmp_path):
    f = tmp_path / "t.csv"
    assert main(["dump-tables", "--env", "base", "--out", str(f)]) == 0
    assert len(f.read_text().splitlines()) == 310


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "decmarl", "run", "--out", str(tmp_path), *FAST],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "metrics.csv").exists()
