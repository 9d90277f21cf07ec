"""Command-line front end: train / eval / sweep / trace.

Every command writes into one output directory: a ``manifest.json`` listing
all artifacts, a ``config_snapshot.txt`` that reproduces the run bit-exactly
when passed back via --config, and the command's own data files. All floats
in text outputs are printed with repr so files round-trip exactly.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import datetime
import json
import sys
import time
from pathlib import Path

from . import __version__
from .agents import load_agent, save_agent
from .config import ConfigError, SimConfig, format_config, load_config
from .trainer import (RunSummary, StepRecord, robustness_sweep, run_evaluation,
                      run_training, trajectory_trace)

AGENT_KINDS = ("ddqn", "dqn", "ql", "dql", "random")


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _default_outdir(command: str) -> Path:
    stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    return Path("runs") / f"{command}-{stamp}"


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _build_config(args, agent_required: bool = True) -> tuple[SimConfig, str]:
    overrides = _parse_overrides(getattr(args, "set", None))
    cfg, extras = load_config(args.config, overrides)
    agent = args.agent or extras.get("agent") or "ddqn"
    if agent_required and agent not in AGENT_KINDS:
        raise ConfigError(f"unknown agent {agent!r} (choose from {', '.join(AGENT_KINDS)})")
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg, agent


class _CsvSink:
    def __init__(self, path: Path, header: list[str]):
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(header)

    def writerow(self, row) -> None:
        self._writer.writerow(row)

    def close(self) -> None:
        self._fh.close()


def _steps_header(n_users: int) -> list[str]:
    cols = ["episode", "t", "n", "m", "mu", "e_f", "e_h", "e_c", "W", "b", "r", "delta"]
    for i in range(n_users):
        cols += [f"tu{i}_x", f"tu{i}_y"]
    return cols


def _step_row(rec: StepRecord) -> list[str]:
    row = [rec.episode, rec.t, rec.n, rec.m, rec.mu, _fmt(rec.e_f), _fmt(rec.e_h),
           _fmt(rec.e_c), _fmt(rec.total_energy), _fmt(rec.battery),
           _fmt(rec.reward), _fmt(rec.slot_duration)]
    for x, y in rec.tu_positions:
        row += [_fmt(x), _fmt(y)]
    return row


def _write_episodes_csv(path: Path, summary: RunSummary, n_users: int) -> None:
    tabular = summary.episodes and summary.episodes[0].table_size is not None
    header = ["episode", "slots", "avg_reward", "sum_throughput_bits",
              "total_energy", "final_battery"]
    header += [f"qos_met_{i}" for i in range(n_users)]
    if tabular:
        header.append("table_size")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ep in summary.episodes:
            row = [ep.episode, ep.slots, _fmt(ep.avg_reward),
                   _fmt(ep.sum_throughput_bits), _fmt(ep.total_energy),
                   _fmt(ep.final_battery)]
            row += [int(flag) for flag in ep.qos_met]
            if tabular:
                row.append(ep.table_size)
            writer.writerow(row)


def _write_summary_txt(path: Path, summary: RunSummary, n_users: int) -> None:
    moving = summary.moving_avg_rewards()
    lines = [
        f"agent = {summary.agent}",
        f"seed = {summary.seed}",
        f"episodes = {len(summary.episodes)}",
        f"window = {summary.window}",
        f"mean_avg_reward = {_fmt(summary.mean_avg_reward())}",
        f"mean_sum_throughput_bits = {_fmt(summary.mean_sum_throughput())}",
        f"final_moving_avg_reward = {_fmt(moving[-1])}",
    ]
    for i, pct in enumerate(summary.qos_percent):
        lines.append(f"qos_percent.{i} = {_fmt(float(pct))}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_qos_table(path: Path, summary: RunSummary) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tu", "qos_percent"])
        for i, pct in enumerate(summary.qos_percent):
            writer.writerow([i, _fmt(float(pct))])


def _write_manifest(outdir: Path, command: str, cfg: SimConfig, agent: str,
                    artifacts: list[str], started: float, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "version": __version__,
        "agent": agent,
        "seed": cfg.seed,
        "output_dir": str(outdir),
        "artifacts": sorted(artifacts),
        "started": datetime.datetime.fromtimestamp(started).isoformat(),
        "finished": datetime.datetime.now().isoformat(),
        "wall_clock_s": time.time() - started,
    }
    if extra:
        manifest.update(extra)
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _prepare_outdir(args, command: str) -> Path:
    outdir = Path(args.out) if args.out else _default_outdir(command)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def cmd_train(args) -> int:
    started = time.time()
    cfg, agent_kind = _build_config(args)
    if args.episodes is not None:
        if args.episodes < 1:
            raise ConfigError(f"--episodes must be >= 1 (got {args.episodes})")
        cfg.learning.N_e = args.episodes
    outdir = _prepare_outdir(args, "train")
    (outdir / "config_snapshot.txt").write_text(
        format_config(cfg, {"agent": agent_kind}), encoding="utf-8")
    steps = _CsvSink(outdir / "steps.csv", _steps_header(cfg.N))
    try:
        summary, agent = run_training(cfg, agent_kind, window=args.window,
                                      step_hook=lambda rec: steps.writerow(_step_row(rec)))
    finally:
        steps.close()
    save_agent(agent, outdir / "checkpoint.txt")
    _write_summary_txt(outdir / "summary.txt", summary, cfg.N)
    _write_episodes_csv(outdir / "episodes.csv", summary, cfg.N)
    _write_manifest(outdir, "train", cfg, agent_kind, started=started, artifacts=[
        "config_snapshot.txt", "steps.csv", "checkpoint.txt", "summary.txt",
        "episodes.csv", "manifest.json"])
    print(f"trained {agent_kind} for {len(summary.episodes)} episodes -> {outdir}")
    return 0


def cmd_eval(args) -> int:
    started = time.time()
    cfg, agent_kind = _build_config(args, agent_required=False)
    if args.episodes < 1:
        raise ConfigError(f"--episodes must be >= 1 (got {args.episodes})")
    agent = load_agent(args.checkpoint, cfg)
    mask = args.qos_mask == "on"
    outdir = _prepare_outdir(args, "eval")
    (outdir / "config_snapshot.txt").write_text(
        format_config(cfg, {"agent": agent.kind}), encoding="utf-8")
    steps = _CsvSink(outdir / "steps.csv", _steps_header(cfg.N))
    try:
        summary = run_evaluation(agent, cfg, args.episodes, qos_mask=mask,
                                 seed=cfg.seed, window=args.window,
                                 step_hook=lambda rec: steps.writerow(_step_row(rec)))
    finally:
        steps.close()
    _write_summary_txt(outdir / "summary.txt", summary, cfg.N)
    _write_episodes_csv(outdir / "episodes.csv", summary, cfg.N)
    _write_qos_table(outdir / "qos_table.csv", summary)
    _write_manifest(outdir, "eval", cfg, agent.kind, started=started,
                    extra={"qos_mask": mask, "checkpoint": args.checkpoint},
                    artifacts=["config_snapshot.txt", "steps.csv", "summary.txt",
                               "episodes.csv", "qos_table.csv", "manifest.json"])
    print(f"evaluated {agent.kind} over {args.episodes} episodes "
          f"(qos mask {args.qos_mask}) -> {outdir}")
    return 0


def _sweep_one(payload: tuple) -> tuple:
    """One (value, agent, seed) cell of a sweep grid; runs in a worker process."""
    cfg, vary, value, agent_kind, seed, train_episodes, eval_episodes = payload
    cfg = copy.deepcopy(cfg)
    cfg.seed = seed
    if vary == "n":
        cfg.N = int(value)
    else:
        cfg.mobility.v_bar = float(value)
    if train_episodes is not None:
        cfg.learning.N_e = train_episodes
    _, agent = run_training(cfg, agent_kind)
    summary = run_evaluation(agent, cfg, eval_episodes, qos_mask=True, seed=seed)
    return (value, agent_kind, seed, summary.mean_sum_throughput(), summary.mean_avg_reward())


def cmd_sweep(args) -> int:
    started = time.time()
    cfg, _ = _build_config(args, agent_required=False)
    values = [float(v) for v in args.values]
    if not values:
        raise ConfigError("--values must list at least one value")
    agents = [a.strip() for a in args.agents.split(",") if a.strip()]
    for a in agents:
        if a not in AGENT_KINDS:
            raise ConfigError(f"unknown agent {a!r} in --agents")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed]
    outdir = _prepare_outdir(args, "sweep")
    (outdir / "config_snapshot.txt").write_text(format_config(cfg), encoding="utf-8")
    grid = [(cfg, args.vary, value, agent, seed, args.train_episodes, args.eval_episodes)
            for value in values for agent in agents for seed in seeds]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, grid))
    else:
        results = [_sweep_one(cell) for cell in grid]
    # Average the per-seed results for each (value, agent) pair, in grid order.
    with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "agent", "mean_sum_throughput_bits", "mean_avg_reward"])
        for value in values:
            for agent in agents:
                cell = [r for r in results if r[0] == value and r[1] == agent]
                thr = sum(r[3] for r in cell) / len(cell)
                rew = sum(r[4] for r in cell) / len(cell)
                writer.writerow([_fmt(value), agent, _fmt(thr), _fmt(rew)])
    with open(outdir / "sweep_runs.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "agent", "seed", "mean_sum_throughput_bits",
                         "mean_avg_reward"])
        for value, agent, seed, thr, rew in results:
            writer.writerow([_fmt(value), agent, seed, _fmt(thr), _fmt(rew)])
    _write_manifest(outdir, "sweep", cfg, args.agents, started=started,
                    extra={"vary": args.vary, "values": [_fmt(v) for v in values],
                           "seeds": seeds},
                    artifacts=["config_snapshot.txt", "sweep.csv", "sweep_runs.csv",
                               "manifest.json"])
    print(f"swept {args.vary} over {len(values)} values x {len(agents)} agents "
          f"x {len(seeds)} seeds -> {outdir}")
    return 0


def cmd_trace(args) -> int:
    started = time.time()
    cfg, _ = _build_config(args, agent_required=False)
    agent = load_agent(args.checkpoint, cfg)
    outdir = _prepare_outdir(args, "trace")
    (outdir / "config_snapshot.txt").write_text(
        format_config(cfg, {"agent": agent.kind}), encoding="utf-8")
    records = trajectory_trace(agent, cfg, seed=cfg.seed,
                               qos_mask=args.qos_mask == "on",
                               max_slots=args.slots)
    header = ["t", "uav_fpap", "uav_x", "uav_y", "served_tu", "serve_fpap", "mu",
              "reward", "battery"]
    for i in range(cfg.N):
        header += [f"tu{i}_x", f"tu{i}_y"]
    with open(outdir / "trajectory.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            row = [rec.t, rec.uav_fpap, _fmt(rec.uav_position[0]),
                   _fmt(rec.uav_position[1]), rec.served_tu, rec.serve_fpap, rec.mu,
                   _fmt(rec.reward), _fmt(rec.battery)]
            for x, y in rec.tu_positions:
                row += [_fmt(x), _fmt(y)]
            writer.writerow(row)
    _write_manifest(outdir, "trace", cfg, agent.kind, started=started,
                    extra={"checkpoint": args.checkpoint, "slots": len(records)},
                    artifacts=["config_snapshot.txt", "trajectory.csv", "manifest.json"])
    print(f"traced {len(records)} slots -> {outdir}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory (default: timestamped)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config field (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavmec",
        description="UAV-mounted edge computing path-planning simulator and trainer")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent and write a checkpoint")
    _add_common(p)
    p.add_argument("--agent", choices=AGENT_KINDS, default=None)
    p.add_argument("--episodes", type=int, default=None, help="override learning.N_e")
    p.add_argument("--window", type=int, default=100, help="moving-average window")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    _add_common(p)
    p.add_argument("--agent", default=None, help=argparse.SUPPRESS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--qos-mask", choices=("on", "off"), default="on")
    p.add_argument("--window", type=int, default=100)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train+eval across a varied parameter")
    _add_common(p)
    p.add_argument("--agent", default=None, help=argparse.SUPPRESS)
    p.add_argument("--vary", choices=("n", "vbar"), required=True)
    p.add_argument("--values", nargs="+", required=True)
    p.add_argument("--agents", default="ddqn,dqn", help="comma-separated agent kinds")
    p.add_argument("--seeds", default=None, help="comma-separated seeds (paired runs)")
    p.add_argument("--train-episodes", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for the grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="single greedy episode for path plotting")
    _add_common(p)
    p.add_argument("--agent", default=None, help=argparse.SUPPRESS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--slots", type=int, default=None, help="cap on traced slots")
    p.add_argument("--qos-mask", choices=("on", "off"), default="on")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
