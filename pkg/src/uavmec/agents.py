"""Value-based agents and the QoS-masked epsilon-greedy policy.

DDQN is the headline method; DQN, tabular Q-learning and double Q-learning
serve as baselines. All four pick actions through the same masked policy:
while any user is below its task threshold, only actions serving a deficient
user are considered.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .config import LearnConfig, SimConfig
from . import env as envmod
from .net import ValueNet, batch_loss


@dataclass
class Transition:
    """One replay record: (s_t, a_t, r_{t+1}, s_{t+1}, terminal)."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayMemory:
    """Fixed-capacity ring; overwrites oldest first, samples only when full."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1 (got {capacity})")
        self.capacity = int(capacity)
        self._buf: list[Transition | None] = [None] * self.capacity
        self._cursor = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def full(self) -> bool:
        return self._count == self.capacity

    def push(self, tr: Transition) -> None:
        self._buf[self._cursor] = tr
        self._cursor = (self._cursor + 1) % self.capacity
        self._count = min(self._count + 1, self.capacity)

    def contents(self) -> list[Transition]:
        return [tr for tr in self._buf if tr is not None]

    def sample(self, k: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform draw of k records without replacement; requires a full ring."""
        if not self.full:
            raise RuntimeError(f"replay sampled before full ({self._count}/{self.capacity})")
        idx = rng.choice(self.capacity, size=k, replace=False)
        return [self._buf[i] for i in idx]


def epsilon_schedule(step: int, lc: LearnConfig) -> float:
    """Linear decay from epsilon0 by delta per decay event, floored at epsilon_min."""
    return max(lc.epsilon_min, lc.epsilon0 - lc.delta * step)


def select_action_qos(q_values, unmet, m_count: int, epsilon: float,
                      rng: np.random.Generator) -> int:
    """Masked epsilon-greedy choice over flat action ids.

    With no deficient user the whole action space is eligible; otherwise only
    actions whose user is deficient. Explores uniformly over the eligible set
    with probability epsilon, else takes its argmax (lowest id wins ties).
    """
    q = np.asarray(q_values, dtype=float)
    unmet = set(unmet)
    if unmet:
        ids = np.arange(q.size)
        cand = ids[np.isin(ids // m_count, list(unmet))]
    else:
        cand = np.arange(q.size)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(cand[rng.integers(0, cand.size)])
    return int(cand[int(np.argmax(q[cand]))])


def ddqn_target(tr: Transition, predicted: ValueNet, target: ValueNet,
                omega: float) -> float:
    """Bootstrap with the action the predicted net picks, valued by the target net."""
    if tr.terminal:
        return tr.reward
    a_star = int(np.argmax(predicted.forward(tr.next_state)))
    return tr.reward + omega * float(target.forward(tr.next_state)[a_star])


def dqn_target(tr: Transition, target: ValueNet, omega: float) -> float:
    """Bootstrap with the target net's own maximum."""
    if tr.terminal:
        return tr.reward
    return tr.reward + omega * float(np.max(target.forward(tr.next_state)))


class DeepAgent:
    """DDQN or DQN: predicted/target net pair plus replay memory."""

    is_tabular = False

    def __init__(self, cfg: SimConfig, kind: str, rng: np.random.Generator):
        if kind not in ("ddqn", "dqn"):
            raise ValueError(f"unknown deep agent kind {kind!r}")
        self.kind = kind
        self.learn = cfg.learning
        sizes = [envmod.state_dim(cfg), *cfg.learning.hidden_sizes, envmod.action_count(cfg)]
        self.predicted = ValueNet(sizes, rng)
        self.target = self.predicted.copy()
        self.replay = ReplayMemory(cfg.learning.replay_capacity)
        self.epsilon_steps = 0
        self.train_calls = 0

    @property
    def epsilon(self) -> float:
        return epsilon_schedule(self.epsilon_steps, self.learn)

    @property
    def ready(self) -> bool:
        return self.replay.full

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.predicted.forward(state)

    def observe(self, tr: Transition) -> None:
        self.replay.push(tr)

    def train_step(self, rng: np.random.Generator) -> float:
        """One mini-batch gradient step; returns the pre-update loss."""
        lc = self.learn
        batch = self.replay.sample(lc.K, rng)
        s2 = np.stack([tr.next_state for tr in batch])
        rewards = np.array([tr.reward for tr in batch])
        alive = np.array([not tr.terminal for tr in batch])
        q_target_next = self.target.forward_batch(s2)
        if self.kind == "ddqn":
            a_star = np.argmax(self.predicted.forward_batch(s2), axis=1)
            boot = q_target_next[np.arange(len(batch)), a_star]
        else:
            boot = np.max(q_target_next, axis=1)
        targets = rewards + lc.omega * np.where(alive, boot, 0.0)
        s = np.stack([tr.state for tr in batch])
        a = np.array([tr.action for tr in batch])
        preds = self.predicted.forward_batch(s)[np.arange(len(batch)), a]
        loss = batch_loss(preds, targets)
        grads = self.predicted.backward(s, a, targets)
        self.predicted.apply_gradients(grads, lc.learning_rate)
        self.train_calls += 1
        if self.train_calls % lc.sync_interval == 0:
            self.target.sync_from(self.predicted)
        return loss


def discretize_state(env: envmod.UavMecEnv, cfg: SimConfig) -> tuple:
    """Quantize the world onto the hover-point lattice plus a battery decile."""
    side = envmod.grid_side(cfg.M)
    sx = cfg.area_width / side
    sy = cfg.area_height / side
    cells = []
    for tu in env.tus:
        col = min(int(tu.x / sx), side - 1)
        row = min(int(tu.y / sy), side - 1)
        cells.append(row * side + col)
    decile = min(9, max(0, int(10.0 * env.battery / cfg.B)))
    return (*cells, env.uav_fpap, decile)


class TabularAgent:
    """Q-learning (one table) or double Q-learning (two, coin-flip updates)."""

    is_tabular = True

    def __init__(self, cfg: SimConfig, kind: str):
        if kind not in ("ql", "dql"):
            raise ValueError(f"unknown tabular agent kind {kind!r}")
        self.kind = kind
        self.learn = cfg.learning
        self.n_actions = envmod.action_count(cfg)
        self.tables: list[dict[tuple, np.ndarray]] = (
            [{}] if kind == "ql" else [{}, {}]
        )
        self.epsilon_steps = 0

    @property
    def epsilon(self) -> float:
        return epsilon_schedule(self.epsilon_steps, self.learn)

    def _row(self, table: dict, key: tuple) -> np.ndarray:
        row = table.get(key)
        return row if row is not None else np.zeros(self.n_actions)

    def q_values(self, key: tuple) -> np.ndarray:
        if self.kind == "ql":
            return self._row(self.tables[0], key)
        return self._row(self.tables[0], key) + self._row(self.tables[1], key)

    def table_size(self) -> int:
        return sum(len(t) for t in self.tables)

    def update(self, key: tuple, action: int, reward: float, next_key: tuple,
               terminal: bool, rng: np.random.Generator) -> None:
        lc = self.learn
        if self.kind == "ql":
            tab = self.tables[0]
            row = tab.setdefault(key, np.zeros(self.n_actions))
            boot = 0.0 if terminal else float(np.max(self._row(tab, next_key)))
            row[action] += lc.learning_rate * (reward + lc.omega * boot - row[action])
            return
        i = int(rng.integers(0, 2))
        tab_a, tab_b = self.tables[i], self.tables[1 - i]
        row = tab_a.setdefault(key, np.zeros(self.n_actions))
        if terminal:
            boot = 0.0
        else:
            a_star = int(np.argmax(self._row(tab_a, next_key)))
            boot = float(self._row(tab_b, next_key)[a_star])
        row[action] += lc.learning_rate * (reward + lc.omega * boot - row[action])


class RandomAgent:
    """Uniform policy (epsilon fixed at 1); the untrained baseline."""

    is_tabular = False
    kind = "random"
    epsilon = 1.0

    def __init__(self, cfg: SimConfig):
        self.n_actions = envmod.action_count(cfg)
        self.epsilon_steps = 0

    def q_values(self, state) -> np.ndarray:
        return np.zeros(self.n_actions)


def make_agent(cfg: SimConfig, kind: str, rng: np.random.Generator):
    if kind in ("ddqn", "dqn"):
        return DeepAgent(cfg, kind, rng)
    if kind in ("ql", "dql"):
        return TabularAgent(cfg, kind)
    if kind == "random":
        return RandomAgent(cfg)
    raise ValueError(f"unknown agent kind {kind!r}")


# ---------------------------------------------------------------------------
# Agent checkpoints: a JSON header line followed by the network parameter
# lines (deep agents) or one JSON line per table entry (tabular agents).
# ---------------------------------------------------------------------------

def save_agent(agent, path: str) -> None:
    header = {
        "format": "uavmec-agent-v1",
        "kind": agent.kind,
        "epsilon_steps": agent.epsilon_steps,
        "learn": asdict(agent.learn) if not isinstance(agent, RandomAgent) else None,
    }
    if isinstance(header["learn"], dict):
        header["learn"]["hidden_sizes"] = list(header["learn"]["hidden_sizes"])
    lines = [json.dumps(header)]
    if isinstance(agent, DeepAgent):
        lines.extend(agent.predicted.param_lines())
    elif isinstance(agent, TabularAgent):
        for i, table in enumerate(agent.tables):
            for key, row in table.items():
                lines.append(json.dumps(
                    {"t": i, "k": list(key), "q": [repr(float(v)) for v in row]}))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_agent(path: str, cfg: SimConfig):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = json.loads(lines[0])
    if header.get("format") != "uavmec-agent-v1":
        raise ValueError(f"{path!r} is not an agent checkpoint")
    kind = header["kind"]
    if header["learn"] is not None:
        learn = LearnConfig(**{**header["learn"],
                               "hidden_sizes": tuple(header["learn"]["hidden_sizes"])})
    else:
        learn = cfg.learning
    if kind in ("ddqn", "dqn"):
        agent = DeepAgent.__new__(DeepAgent)
        agent.kind = kind
        agent.learn = learn
        agent.predicted = ValueNet.from_param_lines(lines[1:])
        agent.target = agent.predicted.copy()
        agent.replay = ReplayMemory(learn.replay_capacity)
        agent.epsilon_steps = int(header["epsilon_steps"])
        agent.train_calls = 0
        expected = [envmod.state_dim(cfg), *learn.hidden_sizes, envmod.action_count(cfg)]
        if agent.predicted.layer_sizes != expected:
            raise ValueError(
                f"checkpoint layer sizes {agent.predicted.layer_sizes} do not match "
                f"config (expected {expected}; check N, M and include_qos_in_state)"
            )
        return agent
    if kind in ("ql", "dql"):
        agent = TabularAgent(cfg, kind)
        agent.learn = learn
        agent.epsilon_steps = int(header["epsilon_steps"])
        for line in lines[1:]:
            rec = json.loads(line)
            agent.tables[rec["t"]][tuple(rec["k"])] = np.array([float(v) for v in rec["q"]])
        return agent
    if kind == "random":
        return RandomAgent(cfg)
    raise ValueError(f"unknown agent kind {kind!r} in checkpoint")
