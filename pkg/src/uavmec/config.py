"""Run configuration: dataclasses for every tunable plus a flat key/value file format.

Config files are plain text, one ``key = value`` pair per line, ``#`` comments.
Top-level keys address SimConfig fields directly (``N = 5``); mobility and
learning fields use dotted prefixes (``mobility.kappa1 = 0.9``,
``learning.omega = 0.9``). The special key ``agent`` names the algorithm and is
carried through snapshots so a run can be reproduced from its own output.
"""

from __future__ import annotations

import math
import types
import typing
from dataclasses import dataclass, field, fields, asdict


class ConfigError(ValueError):
    """A config file or field value is invalid; the message names the field."""


@dataclass
class MobilityParams:
    """Gauss-Markov motion constants for the terminal users.

    kappa1/kappa2 weight the previous velocity/direction; v_bar is the common
    average speed; theta_bar pins per-user average directions (normally left
    None and redrawn each episode). phi_* and psi_* parametrize the Gaussian
    velocity and direction noise.
    """

    kappa1: float = 0.9
    kappa2: float = 0.9
    v_bar: float = 1.0
    phi_mean: float = 0.0
    phi_std: float = 1.0
    psi_mean: float = 0.0
    psi_std: float = 0.2
    area_width: float = 1000.0
    area_height: float = 1000.0
    theta_bar: tuple[float, ...] | None = None

    def validate(self) -> None:
        if not 0.0 <= self.kappa1 <= 1.0:
            raise ConfigError(f"mobility.kappa1 must be in [0, 1] (got {self.kappa1})")
        if not 0.0 <= self.kappa2 <= 1.0:
            raise ConfigError(f"mobility.kappa2 must be in [0, 1] (got {self.kappa2})")
        if self.phi_std < 0.0:
            raise ConfigError(f"mobility.phi_std must be >= 0 (got {self.phi_std})")
        if self.psi_std < 0.0:
            raise ConfigError(f"mobility.psi_std must be >= 0 (got {self.psi_std})")
        if self.v_bar < 0.0:
            raise ConfigError(f"mobility.v_bar must be >= 0 (got {self.v_bar})")
        if self.area_width <= 0.0 or self.area_height <= 0.0:
            raise ConfigError("mobility area dimensions must be > 0")


@dataclass
class LearnConfig:
    """Learning hyperparameters shared by the deep and tabular agents."""

    omega: float = 0.9            # discount factor
    learning_rate: float = 1e-3
    epsilon0: float = 1.0
    epsilon_min: float = 0.1
    delta: float = 0.005          # epsilon decrement per decay event
    K: int = 64                   # mini-batch size
    replay_capacity: int = 10_000
    sync_interval: int = 200      # train calls between target-net overwrites
    N_e: int = 500                # training episodes
    hidden_sizes: tuple[int, ...] = (128, 64)
    epsilon_decay_per: str = "step"  # "step" or "episode"

    def validate(self) -> None:
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError(f"learning.omega must be in [0, 1] (got {self.omega})")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning.learning_rate must be in (0, 1] (got {self.learning_rate})")
        if not 0.0 <= self.epsilon_min <= self.epsilon0 <= 1.0:
            raise ConfigError(
                "learning epsilon schedule requires 0 <= epsilon_min <= epsilon0 <= 1 "
                f"(got epsilon_min={self.epsilon_min}, epsilon0={self.epsilon0})"
            )
        if self.delta < 0.0:
            raise ConfigError(f"learning.delta must be >= 0 (got {self.delta})")
        if self.K < 1:
            raise ConfigError(f"learning.K must be >= 1 (got {self.K})")
        if self.replay_capacity < self.K:
            raise ConfigError(
                f"learning.replay_capacity must be >= K (got {self.replay_capacity} < {self.K})"
            )
        if self.sync_interval < 1:
            raise ConfigError(f"learning.sync_interval must be >= 1 (got {self.sync_interval})")
        if self.N_e < 1:
            raise ConfigError(f"learning.N_e must be >= 1 (got {self.N_e})")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ConfigError(f"learning.hidden_sizes must be positive (got {self.hidden_sizes})")
        if self.epsilon_decay_per not in ("step", "episode"):
            raise ConfigError(
                f"learning.epsilon_decay_per must be 'step' or 'episode' (got {self.epsilon_decay_per!r})"
            )


@dataclass
class SimConfig:
    """Every physical, channel, mobility, and learning constant for a run."""

    N: int = 5                    # terminal users
    M: int = 25                   # hover points (perfect square)
    area_width: float = 1000.0    # m
    area_height: float = 1000.0   # m
    H: float = 50.0               # UAV altitude, m
    B: float = 200e3              # battery capacity, J
    V: float = 20.0               # flight speed, m/s
    P_f: float = 110.0            # flying power, W
    P_h: float = 80.0             # hovering power, W
    P_t: float = 0.1              # user transmit power, W
    sigma2: float = 1e-14         # noise power, W
    rho0: float = 1e-5            # path-loss reference gain at 1 m
    bandwidth: float = 1e6        # Hz
    gamma_c: float = 1e-27        # switched capacitance, F
    C: float = 1000.0             # CPU cycles per bit
    f_c: float = 2e9              # CPU frequency, Hz
    N_b: float = 1e8              # bits per task
    mu_max: int = 10              # max tasks per slot
    eta: float = 2.0              # utility shape
    beta: float = 10.0            # utility shape
    Z: int = 5                    # per-user task threshold per episode
    path_loss_exponent: float = 1.0
    start_fpap: int = -1          # -1 selects the grid centre
    include_qos_in_state: bool = True
    slot_cap: int = 10_000        # safety bound on slots per episode
    seed: int = 0
    mobility: MobilityParams = field(default_factory=MobilityParams)
    learning: LearnConfig = field(default_factory=LearnConfig)

    def validate(self) -> None:
        """Check invariants, raising ConfigError naming the offending field."""
        if self.N < 1:
            raise ConfigError(f"N must be >= 1 (got {self.N})")
        if self.M < 1 or math.isqrt(self.M) ** 2 != self.M:
            raise ConfigError(f"M must be a positive perfect square (got {self.M})")
        for name in ("area_width", "area_height", "H", "B", "V", "P_f", "P_h", "P_t",
                     "sigma2", "rho0", "bandwidth", "gamma_c", "C", "f_c", "N_b",
                     "eta", "beta"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be > 0 (got {getattr(self, name)})")
        if self.mu_max < 0:
            raise ConfigError(f"mu_max must be >= 0 (got {self.mu_max})")
        if self.Z < 1:
            raise ConfigError(f"Z must be >= 1 (got {self.Z})")
        if self.path_loss_exponent <= 0.0:
            raise ConfigError(f"path_loss_exponent must be > 0 (got {self.path_loss_exponent})")
        if not -1 <= self.start_fpap < self.M:
            raise ConfigError(f"start_fpap must be -1 or in [0, M) (got {self.start_fpap})")
        if self.slot_cap < 1:
            raise ConfigError(f"slot_cap must be >= 1 (got {self.slot_cap})")
        # The top-level area is authoritative; keep the mobility copy in sync.
        self.mobility.area_width = self.area_width
        self.mobility.area_height = self.area_height
        if self.mobility.theta_bar is not None and len(self.mobility.theta_bar) != self.N:
            raise ConfigError(
                f"mobility.theta_bar must have N={self.N} entries (got {len(self.mobility.theta_bar)})"
            )
        self.mobility.validate()
        self.learning.validate()


# ---------------------------------------------------------------------------
# Flat key/value config file handling
# ---------------------------------------------------------------------------

_SECTIONS = {"mobility": MobilityParams, "learning": LearnConfig}


def _field_hints(cls) -> dict[str, object]:
    return typing.get_type_hints(cls)


def _cast_value(key: str, hint: object, raw: str):
    raw = raw.strip()
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        if raw.lower() in ("none", ""):
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
        origin = typing.get_origin(hint)
    try:
        if hint is bool:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            try:
                return int(raw)
            except ValueError:
                f = float(raw)
                if f != int(f):
                    raise
                return int(f)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
        if origin is tuple:
            elem = typing.get_args(hint)[0]
            parts = [p for p in raw.replace(",", " ").split() if p]
            return tuple(elem(p) for p in parts)
    except (ValueError, TypeError):
        raise ConfigError(f"invalid value for {key!r}: {raw!r}") from None
    raise ConfigError(f"cannot parse field {key!r}")


def parse_config_text(text: str) -> dict[str, str]:
    """Split config text into raw key/value strings, checking line syntax only."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def apply_raw(cfg: SimConfig, raw: dict[str, str]) -> dict[str, str]:
    """Apply raw key/value overrides onto cfg in place.

    Returns the leftover non-field keys (currently just ``agent``); anything
    else unknown raises ConfigError.
    """
    top_hints = _field_hints(SimConfig)
    extras: dict[str, str] = {}
    for key, value in raw.items():
        if key == "agent":
            extras[key] = value
            continue
        if "." in key:
            section, _, name = key.partition(".")
            cls = _SECTIONS.get(section)
            if cls is None:
                raise ConfigError(f"unknown config section {section!r} in key {key!r}")
            hints = _field_hints(cls)
            if name not in hints:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(getattr(cfg, section), name, _cast_value(key, hints[name], value))
        else:
            if key not in top_hints or key in ("mobility", "learning"):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _cast_value(key, top_hints[key], value))
    return extras


def load_config(path: str, overrides: dict[str, str] | None = None) -> tuple[SimConfig, dict[str, str]]:
    """Build a SimConfig from a file plus overrides; either may be omitted."""
    cfg = SimConfig()
    extras: dict[str, str] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc.strerror}") from None
        extras.update(apply_raw(cfg, parse_config_text(text)))
    if overrides:
        extras.update(apply_raw(cfg, overrides))
    return cfg, extras


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def format_config(cfg: SimConfig, extras: dict[str, str] | None = None) -> str:
    """Render cfg (plus extra run keys) in the flat file format, round-trip exact."""
    lines = []
    if extras:
        for key in sorted(extras):
            lines.append(f"{key} = {extras[key]}")
    for f in fields(SimConfig):
        if f.name in ("mobility", "learning"):
            continue
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    for section in ("mobility", "learning"):
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def config_as_dict(cfg: SimConfig) -> dict:
    return asdict(cfg)
