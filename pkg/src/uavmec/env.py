"""The MDP world: hover-point grid, line-of-sight channel, three-part energy
ledger, battery dynamics, and the reward that trades utility against energy.

An episode is one battery discharge: each slot the UAV flies to a hover point,
serves one user's offloaded tasks, pays flying + hovering + computing energy,
and every user then moves for the slot's duration. The episode ends when the
battery is exhausted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import mobility
from .config import SimConfig
from .mobility import TuState


@dataclass(frozen=True)
class Action:
    """Serve user ``tu`` from hover point ``fpap``; flat id = tu * M + fpap."""

    tu: int
    fpap: int

    def to_flat(self, m_count: int) -> int:
        return self.tu * m_count + self.fpap

    @staticmethod
    def from_flat(flat: int, m_count: int) -> "Action":
        return Action(flat // m_count, flat % m_count)


@dataclass
class StepOutcome:
    """Everything one slot produced, including the full energy breakdown."""

    reward: float
    mu_served: int
    e_f: float
    e_h: float
    e_c: float
    total_energy: float      # e_f + e_h + e_c, the amount debited
    slot_duration: float     # s
    next_state: np.ndarray
    terminal: bool
    battery: float           # residual energy after the debit, J


def grid_side(m_count: int) -> int:
    side = math.isqrt(m_count)
    if side * side != m_count:
        raise ValueError(f"hover-point count must be a perfect square (got {m_count})")
    return side


def fpap_position(m: int, cfg: SimConfig) -> tuple[float, float]:
    """Hover point m on the sqrt(M) x sqrt(M) grid with half-spacing margins."""
    if not 0 <= m < cfg.M:
        raise IndexError(f"hover-point index {m} out of range [0, {cfg.M})")
    side = grid_side(cfg.M)
    sx = cfg.area_width / side
    sy = cfg.area_height / side
    return ((m % side + 0.5) * sx, (m // side + 0.5) * sy)


def channel_gain(tu_pos: tuple[float, float], uav_pos: tuple[float, float],
                 cfg: SimConfig) -> float:
    """Line-of-sight gain: reference gain over the 3-D distance (exponent configurable)."""
    dx = uav_pos[0] - tu_pos[0]
    dy = uav_pos[1] - tu_pos[1]
    dist = math.sqrt(cfg.H ** 2 + dx * dx + dy * dy)
    return cfg.rho0 / dist ** cfg.path_loss_exponent


def uplink_rate(tu_pos: tuple[float, float], uav_pos: tuple[float, float],
                cfg: SimConfig) -> float:
    """Offloading rate in bits/s over the configured bandwidth."""
    snr = cfg.P_t * channel_gain(tu_pos, uav_pos, cfg) / cfg.sigma2
    return cfg.bandwidth * math.log2(1.0 + snr)


def flying_energy(from_fpap: int, to_fpap: int, cfg: SimConfig) -> tuple[float, float]:
    """Energy and time to fly between two hover points at constant speed."""
    x0, y0 = fpap_position(from_fpap, cfg)
    x1, y1 = fpap_position(to_fpap, cfg)
    t_fly = math.hypot(x1 - x0, y1 - y0) / cfg.V
    return cfg.P_f * t_fly, t_fly


def hovering_energy(mu: int, rate: float, cfg: SimConfig) -> tuple[float, float]:
    """Energy and time hovering while mu tasks upload at the given rate."""
    if rate <= 0.0:
        raise ValueError(f"uplink rate must be positive (got {rate})")
    t_hover = mu * cfg.N_b / rate
    return cfg.P_h * t_hover, t_hover


def computing_energy(mu: int, cfg: SimConfig) -> tuple[float, float]:
    """Energy and time to execute mu offloaded tasks on the onboard CPU."""
    e_c = cfg.gamma_c * cfg.C * cfg.f_c ** 2 * mu * cfg.N_b
    t_comp = cfg.C * mu * cfg.N_b / cfg.f_c
    return e_c, t_comp


def utility(mu: int, cfg: SimConfig) -> float:
    """Sigmoid-like service utility in [0, 1): steep early, saturating late."""
    return 1.0 - math.exp(-(mu ** cfg.eta) / (mu + cfg.beta))


def worst_case_slot_energy(cfg: SimConfig) -> float:
    """Analytic upper bound on one slot's energy: longest flight, worst rate, max tasks."""
    side = grid_side(cfg.M)
    sx = cfg.area_width / side
    sy = cfg.area_height / side
    d_diag = math.hypot((side - 1) * sx, (side - 1) * sy)
    w_fly = cfg.P_f * d_diag / cfg.V
    # Worst rate: user in an area corner, UAV at the diagonally opposite hover point.
    d_far = math.hypot(cfg.area_width - 0.5 * sx, cfg.area_height - 0.5 * sy)
    gain_min = cfg.rho0 / math.sqrt(cfg.H ** 2 + d_far ** 2) ** cfg.path_loss_exponent
    r_min = cfg.bandwidth * math.log2(1.0 + cfg.P_t * gain_min / cfg.sigma2)
    w_hover = cfg.P_h * cfg.mu_max * cfg.N_b / r_min
    w_comp = cfg.gamma_c * cfg.C * cfg.f_c ** 2 * cfg.mu_max * cfg.N_b
    return w_fly + w_hover + w_comp


def psi_normalizer(cfg: SimConfig) -> float:
    """Reciprocal of the worst-case slot energy; scales energy into [0, 1]."""
    return 1.0 / worst_case_slot_energy(cfg)


def state_dim(cfg: SimConfig) -> int:
    return 3 * cfg.N + 3 if cfg.include_qos_in_state else 2 * cfg.N + 3


def action_count(cfg: SimConfig) -> int:
    return cfg.N * cfg.M


def default_start_fpap(cfg: SimConfig) -> int:
    if cfg.start_fpap >= 0:
        return cfg.start_fpap
    side = grid_side(cfg.M)
    return (side // 2) * side + side // 2


def _check_feasibility(cfg: SimConfig) -> None:
    """Warn when the per-user task threshold looks unreachable within one battery."""
    side = grid_side(cfg.M)
    sx = cfg.area_width / side
    sy = cfg.area_height / side
    mu_bar = cfg.mu_max / 2.0
    e_f_typ = cfg.P_f * 0.5 * math.hypot((side - 1) * sx, (side - 1) * sy) / cfg.V
    d_typ = 0.25 * math.hypot(cfg.area_width, cfg.area_height)
    gain_typ = cfg.rho0 / math.sqrt(cfg.H ** 2 + d_typ ** 2) ** cfg.path_loss_exponent
    r_typ = cfg.bandwidth * math.log2(1.0 + cfg.P_t * gain_typ / cfg.sigma2)
    w_typ = e_f_typ + cfg.P_h * mu_bar * cfg.N_b / r_typ \
        + cfg.gamma_c * cfg.C * cfg.f_c ** 2 * mu_bar * cfg.N_b
    expected_tasks = cfg.B / w_typ * mu_bar
    if cfg.N * cfg.Z > expected_tasks:
        warnings.warn(
            f"QoS threshold Z={cfg.Z} for N={cfg.N} users needs ~{cfg.N * cfg.Z} tasks "
            f"but one battery supports only ~{expected_tasks:.0f}; episodes will "
            "routinely miss the threshold",
            RuntimeWarning,
            stacklevel=3,
        )


class UavMecEnv:
    """Single-owner mutable episode state; one episode advances strictly sequentially.

    Per step the env draws, in fixed order, the served task count and then the
    per-user mobility noise, so two runs with the same seed consume identical
    random streams even when their actions differ.
    """

    def __init__(self, cfg: SimConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.psi = psi_normalizer(cfg)
        self.fpaps = [fpap_position(m, cfg) for m in range(cfg.M)]
        self.tus: list[TuState] = []
        self.uav_fpap = default_start_fpap(cfg)
        self.battery = 0.0
        self.t = 0
        self.terminal = True
        self._params = cfg.mobility
        _check_feasibility(cfg)

    @property
    def uav_position(self) -> tuple[float, float]:
        return self.fpaps[self.uav_fpap]

    def reset(self) -> np.ndarray:
        """Start a fresh episode: full battery, UAV at the start point, users scattered."""
        cfg = self.cfg
        rng = self.rng
        xs = rng.uniform(0.0, cfg.area_width, cfg.N)
        ys = rng.uniform(0.0, cfg.area_height, cfg.N)
        if cfg.mobility.theta_bar is not None:
            theta_bar = tuple(cfg.mobility.theta_bar)
        else:
            theta_bar = tuple(rng.uniform(0.0, mobility.TWO_PI, cfg.N))
        directions = rng.uniform(0.0, mobility.TWO_PI, cfg.N)
        self._params = replace(cfg.mobility, theta_bar=theta_bar)
        self.tus = [
            TuState(float(xs[n]), float(ys[n]), cfg.mobility.v_bar, float(directions[n]))
            for n in range(cfg.N)
        ]
        self.uav_fpap = default_start_fpap(cfg)
        self.battery = cfg.B
        self.t = 0
        self.terminal = False
        return self.encode_state()

    def step(self, action: int | Action) -> StepOutcome:
        """Advance one slot; raises if the episode already terminated."""
        if self.terminal:
            raise RuntimeError("step() called on a terminated episode; reset() first")
        cfg = self.cfg
        if isinstance(action, Action):
            n, m = action.tu, action.fpap
        else:
            n, m = divmod(int(action), cfg.M)
        if not 0 <= n < cfg.N or not 0 <= m < cfg.M:
            raise IndexError(f"action ({n}, {m}) out of range for N={cfg.N}, M={cfg.M}")

        e_f, t_fly = flying_energy(self.uav_fpap, m, cfg)
        self.uav_fpap = m
        mu = int(self.rng.integers(0, cfg.mu_max + 1))
        rate = uplink_rate(self.tus[n].position, self.fpaps[m], cfg)
        e_h, t_hover = hovering_energy(mu, rate, cfg)
        e_c, t_comp = computing_energy(mu, cfg)
        total = e_f + e_h + e_c
        self.battery = self.battery - total
        reward = utility(mu, cfg) - self.psi * total
        slot = t_fly + t_hover + t_comp
        self.tus = mobility.step_all(self.tus, self._params, slot, self.rng)
        self.tus[n].cum_tasks += mu
        self.t += 1
        self.terminal = self.battery <= 0.0
        return StepOutcome(
            reward=reward,
            mu_served=mu,
            e_f=e_f,
            e_h=e_h,
            e_c=e_c,
            total_energy=total,
            slot_duration=slot,
            next_state=self.encode_state(),
            terminal=self.terminal,
            battery=self.battery,
        )

    def encode_state(self) -> np.ndarray:
        """Flat vector: user positions, UAV position, battery, and (optionally)
        per-user progress toward the task threshold; everything scaled to [0, 1]
        except the battery entry, which can dip negative on the final slot."""
        cfg = self.cfg
        out = np.empty(state_dim(cfg))
        i = 0
        for tu in self.tus:
            out[i] = tu.x / cfg.area_width
            out[i + 1] = tu.y / cfg.area_height
            i += 2
        ux, uy = self.fpaps[self.uav_fpap]
        out[i] = ux / cfg.area_width
        out[i + 1] = uy / cfg.area_height
        out[i + 2] = self.battery / cfg.B
        i += 3
        if cfg.include_qos_in_state:
            for tu in self.tus:
                out[i] = min(tu.cum_tasks / cfg.Z, 1.0)
                i += 1
        return out

    def qos_unmet(self) -> list[int]:
        """Users still below the per-episode task threshold (empty = all satisfied)."""
        return [n for n, tu in enumerate(self.tus) if tu.cum_tasks < self.cfg.Z]
