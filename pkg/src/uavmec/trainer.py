"""Offline training over battery-discharge episodes, greedy online evaluation,
speed-robustness sweeps, and single-episode trajectory traces.

Training follows the masked epsilon-greedy loop: act, store the transition,
learn once the replay memory is full, decay epsilon. Evaluation replays the
frozen policy greedily (epsilon = 0) with the QoS mask on or off.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from .agents import (DeepAgent, RandomAgent, TabularAgent, Transition,
                     discretize_state, make_agent, select_action_qos)
from .config import SimConfig
from .env import UavMecEnv


@dataclass
class StepRecord:
    """One per-slot trace row; the CSV column order mirrors the field order."""

    episode: int
    t: int
    n: int
    m: int
    mu: int
    e_f: float
    e_h: float
    e_c: float
    total_energy: float
    battery: float
    reward: float
    slot_duration: float
    tu_positions: tuple[tuple[float, float], ...]


@dataclass
class EpisodeMetrics:
    episode: int
    slots: int
    avg_reward: float           # sum of rewards / slots
    sum_throughput_bits: float  # served tasks * bits per task
    qos_met: tuple[bool, ...]
    total_energy: float
    final_battery: float
    table_size: int | None = None  # tabular agents only


@dataclass
class RunSummary:
    agent: str
    seed: int
    episodes: list[EpisodeMetrics]
    window: int = 100
    wall_clock_s: float = 0.0

    @property
    def qos_percent(self) -> np.ndarray:
        """Per-user percentage of episodes in which the task threshold was met."""
        flags = np.array([ep.qos_met for ep in self.episodes], dtype=float)
        return flags.mean(axis=0) * 100.0

    def avg_rewards(self) -> list[float]:
        return [ep.avg_reward for ep in self.episodes]

    def moving_avg_rewards(self) -> list[float]:
        rewards = self.avg_rewards()
        out = []
        acc = 0.0
        for i, r in enumerate(rewards):
            acc += r
            if i >= self.window:
                acc -= rewards[i - self.window]
            out.append(acc / min(i + 1, self.window))
        return out

    def mean_sum_throughput(self) -> float:
        return float(np.mean([ep.sum_throughput_bits for ep in self.episodes]))

    def mean_avg_reward(self) -> float:
        return float(np.mean([ep.avg_reward for ep in self.episodes]))


def _run_episode(env: UavMecEnv, agent, cfg: SimConfig, episode: int, *,
                 rng: np.random.Generator | None, learn: bool, qos_mask: bool,
                 epsilon_override: float | None, step_hook=None) -> EpisodeMetrics:
    """One battery discharge; returns its metrics. ``rng`` drives exploration,
    replay sampling, and coin flips; greedy evaluation never touches it."""
    state = env.reset()
    key = discretize_state(env, cfg) if agent.is_tabular else None
    reward_sum = 0.0
    tasks = 0
    energy = 0.0
    t = 0
    while not env.terminal and t < cfg.slot_cap:
        unmet = env.qos_unmet() if qos_mask else []
        q = agent.q_values(key if agent.is_tabular else state)
        epsilon = agent.epsilon if epsilon_override is None else epsilon_override
        action = select_action_qos(q, unmet, cfg.M, epsilon, rng)
        outcome = env.step(action)
        if learn:
            if agent.is_tabular:
                next_key = discretize_state(env, cfg)
                agent.update(key, action, outcome.reward, next_key, outcome.terminal, rng)
                key = next_key
            elif isinstance(agent, DeepAgent):
                agent.observe(Transition(state, action, outcome.reward,
                                         outcome.next_state, outcome.terminal))
                if agent.ready:
                    agent.train_step(rng)
            if cfg.learning.epsilon_decay_per == "step":
                agent.epsilon_steps += 1
        elif agent.is_tabular:
            key = discretize_state(env, cfg)
        if step_hook is not None:
            step_hook(StepRecord(
                episode=episode, t=t, n=action // cfg.M, m=action % cfg.M,
                mu=outcome.mu_served, e_f=outcome.e_f, e_h=outcome.e_h,
                e_c=outcome.e_c, total_energy=outcome.total_energy,
                battery=outcome.battery, reward=outcome.reward,
                slot_duration=outcome.slot_duration,
                tu_positions=tuple(tu.position for tu in env.tus),
            ))
        reward_sum += outcome.reward
        tasks += outcome.mu_served
        energy += outcome.total_energy
        state = outcome.next_state
        t += 1
    if learn and cfg.learning.epsilon_decay_per == "episode":
        agent.epsilon_steps += 1
    return EpisodeMetrics(
        episode=episode,
        slots=t,
        avg_reward=reward_sum / t,
        sum_throughput_bits=tasks * cfg.N_b,
        qos_met=tuple(tu.cum_tasks >= cfg.Z for tu in env.tus),
        total_energy=energy,
        final_battery=env.battery,
        table_size=agent.table_size() if agent.is_tabular else None,
    )


def run_training(cfg: SimConfig, agent_kind: str = "ddqn", *, step_hook=None,
                 window: int = 100):
    """Train an agent for cfg.learning.N_e episodes; returns (summary, agent)."""
    cfg.validate()
    started = time.perf_counter()
    env_rng, agent_rng = [np.random.default_rng(s)
                          for s in np.random.SeedSequence(cfg.seed).spawn(2)]
    env = UavMecEnv(cfg, env_rng)
    agent = make_agent(cfg, agent_kind, agent_rng)
    metrics = [
        _run_episode(env, agent, cfg, ep, rng=agent_rng, learn=True, qos_mask=True,
                     epsilon_override=None, step_hook=step_hook)
        for ep in range(cfg.learning.N_e)
    ]
    summary = RunSummary(agent=agent_kind, seed=cfg.seed, episodes=metrics,
                         window=window, wall_clock_s=time.perf_counter() - started)
    return summary, agent


def run_evaluation(agent, cfg: SimConfig, episodes: int, *, qos_mask: bool = True,
                   seed: int | None = None, step_hook=None,
                   window: int = 100) -> RunSummary:
    """Greedy rollouts of a frozen policy; never mutates the agent."""
    cfg.validate()
    if episodes < 1:
        raise ValueError(f"evaluation needs at least one episode (got {episodes})")
    started = time.perf_counter()
    seed = cfg.seed if seed is None else seed
    env = UavMecEnv(cfg, np.random.default_rng(seed))
    metrics = [
        _run_episode(env, agent, cfg, ep, rng=None, learn=False, qos_mask=qos_mask,
                     epsilon_override=0.0, step_hook=step_hook)
        for ep in range(episodes)
    ]
    return RunSummary(agent=getattr(agent, "kind", "?"), seed=seed, episodes=metrics,
                      window=window, wall_clock_s=time.perf_counter() - started)


def robustness_sweep(agent, cfg: SimConfig, speeds, episodes: int, *,
                     qos_mask: bool = True, seed: int | None = None,
                     window: int = 100) -> dict[float, RunSummary]:
    """Evaluate one frozen policy at several average user speeds (paired seeds)."""
    out: dict[float, RunSummary] = {}
    for v_bar in speeds:
        cfg_v = copy.deepcopy(cfg)
        cfg_v.mobility.v_bar = float(v_bar)
        out[float(v_bar)] = run_evaluation(agent, cfg_v, episodes, qos_mask=qos_mask,
                                           seed=seed, window=window)
    return out


@dataclass
class TraceRecord:
    """One slot of a plotting trace. ``uav_fpap`` is the hover point at the
    slot's start; ``serve_fpap`` is where the UAV flew to serve."""

    t: int
    uav_fpap: int
    uav_position: tuple[float, float]
    served_tu: int
    serve_fpap: int
    mu: int
    tu_positions: tuple[tuple[float, float], ...]
    reward: float
    battery: float


def trajectory_trace(agent, cfg: SimConfig, *, seed: int | None = None,
                     qos_mask: bool = True, max_slots: int | None = None) -> list[TraceRecord]:
    """One greedy episode recorded slot by slot (the data behind a path plot)."""
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    env = UavMecEnv(cfg, np.random.default_rng(seed))
    state = env.reset()
    key = discretize_state(env, cfg) if agent.is_tabular else None
    cap = cfg.slot_cap if max_slots is None else min(max_slots, cfg.slot_cap)
    records: list[TraceRecord] = []
    t = 0
    while not env.terminal and t < cap:
        start_fpap = env.uav_fpap
        start_pos = env.uav_position
        positions = tuple(tu.position for tu in env.tus)
        unmet = env.qos_unmet() if qos_mask else []
        q = agent.q_values(key if agent.is_tabular else state)
        action = select_action_qos(q, unmet, cfg.M, 0.0, None)
        outcome = env.step(action)
        records.append(TraceRecord(
            t=t, uav_fpap=start_fpap, uav_position=start_pos,
            served_tu=action // cfg.M, serve_fpap=action % cfg.M,
            mu=outcome.mu_served, tu_positions=positions,
            reward=outcome.reward, battery=outcome.battery,
        ))
        state = outcome.next_state
        if agent.is_tabular:
            key = discretize_state(env, cfg)
        t += 1
    return records
