"""Gauss-Markov random motion for the mobile terminal users.

Each slot a user's velocity and direction blend the previous value, a long-run
mean, and Gaussian noise; the position then advances with the previous slot's
velocity/direction. The area is bounded: exits reflect off the violated wall
and mirror the heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import MobilityParams

TWO_PI = 2.0 * math.pi


@dataclass
class TuState:
    """One user's kinematic state plus the episode's served-task counter."""

    x: float
    y: float
    velocity: float
    direction: float
    cum_tasks: int = 0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def step_velocity(tu: TuState, p: MobilityParams, rng: np.random.Generator) -> float:
    """Advance one user's speed; clamped at 0 so speed is never negative."""
    noise = rng.normal(p.phi_mean, p.phi_std)
    v = p.kappa1 * tu.velocity + (1.0 - p.kappa1) * p.v_bar \
        + math.sqrt(1.0 - p.kappa1 ** 2) * noise
    return max(v, 0.0)


def step_direction(tu: TuState, n: int, p: MobilityParams, rng: np.random.Generator) -> float:
    """Advance one user's heading, wrapped into [0, 2*pi)."""
    if p.theta_bar is None:
        raise ValueError("theta_bar is unset; draw per-user mean directions first")
    noise = rng.normal(p.psi_mean, p.psi_std)
    theta = p.kappa2 * tu.direction + (1.0 - p.kappa2) * p.theta_bar[n] \
        + math.sqrt(1.0 - p.kappa2 ** 2) * noise
    return theta % TWO_PI


def step_position(tu: TuState, delta_t: float, area_width: float,
                  area_height: float) -> tuple[float, float, float]:
    """Advance a position with the previous slot's velocity/direction.

    Returns (x, y, direction); boundary exits are folded back across the wall
    and the returned direction is the heading after any mirroring.
    """
    x = tu.x + tu.velocity * math.cos(tu.direction) * delta_t
    y = tu.y + tu.velocity * math.sin(tu.direction) * delta_t
    theta = tu.direction
    # Large displacements can cross a wall several times; fold until inside.
    while not 0.0 <= x <= area_width:
        x = -x if x < 0.0 else 2.0 * area_width - x
        theta = math.pi - theta
    while not 0.0 <= y <= area_height:
        y = -y if y < 0.0 else 2.0 * area_height - y
        theta = -theta
    return x, y, theta % TWO_PI


def step_all(tus: list[TuState], p: MobilityParams, delta_t: float,
             rng: np.random.Generator) -> list[TuState]:
    """Advance every user one slot, in index order; deterministic given rng state."""
    out = []
    for n, tu in enumerate(tus):
        x, y, bounced = step_position(tu, delta_t, p.area_width, p.area_height)
        moved = TuState(x, y, tu.velocity, bounced, tu.cum_tasks)
        velocity = step_velocity(moved, p, rng)
        direction = step_direction(moved, n, p, rng)
        out.append(TuState(x, y, velocity, direction, tu.cum_tasks))
    return out
