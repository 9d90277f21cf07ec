import csv
import json
from pathlib import Path

import pytest

from uavmec.cli import main

DESK = [
    "--set", "N=3", "--set", "M=9", "--set", "B=60e3",
    "--set", "learning.N_e=20", "--set", "learning.replay_capacity=200",
    "--set", "learning.K=16", "--set", "learning.hidden_sizes=32,16",
]


def run_cli(*argv):
    return main([str(a) for a in argv])


def train_into(tmp_path, name, *extra):
    out = tmp_path / name
    code = run_cli("train", "--agent", "ddqn", "--seed", "7", "--out", out,
                   *DESK, *extra)
    assert code == 0
    return out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_missing_config_file_names_path(tmp_path, capsys):
    code = run_cli("train", "--config", tmp_path / "nope.cfg", "--out", tmp_path / "o")
    assert code != 0
    err = capsys.readouterr().err
    assert "nope.cfg" in err


def test_invalid_m_names_field(tmp_path, capsys):
    code = run_cli("train", "--set", "M=24", "--out", tmp_path / "o")
    assert code != 0
    assert "M" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path, capsys):
    code = run_cli("train", "--set", "warp_speed=9", "--out", tmp_path / "o")
    assert code != 0
    assert "warp_speed" in capsys.readouterr().err


def test_train_outputs_and_determinism(tmp_path):
    out1 = train_into(tmp_path, "run1")
    out2 = train_into(tmp_path, "run2")
    expected = {"manifest.json", "config_snapshot.txt", "checkpoint.txt",
                "summary.txt", "episodes.csv", "steps.csv"}
    assert {p.name for p in out1.iterdir()} == expected
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert sorted(manifest["artifacts"]) == sorted(expected)
    for name in expected - {"manifest.json"}:  # manifest holds timestamps
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_snapshot_round_trip_reproduces_run(tmp_path):
    out1 = train_into(tmp_path, "orig")
    out2 = tmp_path / "replay"
    code = run_cli("train", "--config", out1 / "config_snapshot.txt", "--out", out2)
    assert code == 0
    for name in ("summary.txt", "episodes.csv", "steps.csv", "checkpoint.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_steps_csv_schema(tmp_path):
    out = train_into(tmp_path, "run")
    rows = read_rows(out / "steps.csv")
    assert rows[0] == ["episode", "t", "n", "m", "mu", "e_f", "e_h", "e_c", "W",
                       "b", "r", "delta", "tu0_x", "tu0_y", "tu1_x", "tu1_y",
                       "tu2_x", "tu2_y"]
    assert all(len(row) == len(rows[0]) for row in rows)


def test_eval_outputs(tmp_path):
    out = train_into(tmp_path, "train")
    evout = tmp_path / "eval"
    code = run_cli("eval", "--checkpoint", out / "checkpoint.txt", "--episodes", "10",
                   "--qos-mask", "on", "--seed", "3", "--out", evout, *DESK)
    assert code == 0
    manifest = json.loads((evout / "manifest.json").read_text())
    assert manifest["qos_mask"] is True
    rows = read_rows(evout / "qos_table.csv")
    assert rows[0] == ["tu", "qos_percent"]
    assert len(rows) == 1 + 3  # header + one row per user


def test_eval_zero_episodes_is_usage_error(tmp_path, capsys):
    out = train_into(tmp_path, "train")
    code = run_cli("eval", "--checkpoint", out / "checkpoint.txt", "--episodes", "0",
                   "--out", tmp_path / "e", *DESK)
    assert code != 0
    assert "episodes" in capsys.readouterr().err


def test_eval_checkpoint_config_mismatch(tmp_path, capsys):
    out = train_into(tmp_path, "train")
    code = run_cli("eval", "--checkpoint", out / "checkpoint.txt", "--episodes", "5",
                   "--out", tmp_path / "e", "--set", "N=4", *DESK[2:])
    assert code != 0
    assert "layer sizes" in capsys.readouterr().err


def test_sweep_csv_rows_and_manifest(tmp_path):
    out = tmp_path / "sweep"
    code = run_cli("sweep", "--vary", "vbar", "--values", "1", "5",
                   "--agents", "random,ql", "--seeds", "1,2",
                   "--train-episodes", "5", "--eval-episodes", "5",
                   "--out", out, *DESK)
    assert code == 0
    rows = read_rows(out / "sweep.csv")
    assert rows[0] == ["value", "agent", "mean_sum_throughput_bits", "mean_avg_reward"]
    assert len(rows) == 1 + 2 * 2  # values x agents
    runs = read_rows(out / "sweep_runs.csv")
    assert len(runs) == 1 + 2 * 2 * 2  # values x agents x seeds
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["vary"] == "vbar"
    assert manifest["values"] == ["1.0", "5.0"]
    assert manifest["seeds"] == [1, 2]


def test_sweep_parallel_jobs_match_serial(tmp_path):
    args = ("sweep", "--vary", "n", "--values", "2", "3", "--agents", "random",
            "--seeds", "1,2", "--train-episodes", "4", "--eval-episodes", "4", *DESK)
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    assert run_cli(*args, "--jobs", "1", "--out", serial) == 0
    assert run_cli(*args, "--jobs", "2", "--out", parallel) == 0
    assert (serial / "sweep.csv").read_bytes() == (parallel / "sweep.csv").read_bytes()


def test_trace_outputs(tmp_path):
    out = train_into(tmp_path, "train")
    trout = tmp_path / "trace"
    code = run_cli("trace", "--checkpoint", out / "checkpoint.txt", "--out", trout,
                   "--seed", "9", *DESK)
    assert code == 0
    rows = read_rows(trout / "trajectory.csv")
    assert rows[0][:9] == ["t", "uav_fpap", "uav_x", "uav_y", "served_tu",
                           "serve_fpap", "mu", "reward", "battery"]
    assert rows[1][0] == "0"
    manifest = json.loads((trout / "manifest.json").read_text())
    assert manifest["slots"] == len(rows) - 1


def test_config_file_and_override_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("N = 4\nM = 9\nB = 60e3\nseed = 5\n"
                        "learning.N_e = 3\nlearning.replay_capacity = 64\n"
                        "learning.K = 8\nlearning.hidden_sizes = 16,8\n"
                        "agent = random\n")
    out = tmp_path / "out"
    code = run_cli("train", "--config", cfg_file, "--set", "N=2", "--out", out)
    assert code == 0
    snapshot = (out / "config_snapshot.txt").read_text()
    assert "N = 2" in snapshot          # override wins
    assert "agent = random" in snapshot  # agent carried from file
