"""UAV-mounted mobile edge computing: path-planning simulator and DDQN trainer."""

__version__ = "0.1.0"

from .config import ConfigError, LearnConfig, MobilityParams, SimConfig
from .env import Action, StepOutcome, UavMecEnv
from .mobility import TuState
from .net import ValueNet
from .agents import (DeepAgent, RandomAgent, ReplayMemory, TabularAgent,
                     Transition, ddqn_target, dqn_target, epsilon_schedule,
                     load_agent, make_agent, save_agent, select_action_qos)
from .trainer import (EpisodeMetrics, RunSummary, StepRecord, TraceRecord,
                      robustness_sweep, run_evaluation, run_training,
                      trajectory_trace)

__all__ = [
    "Action", "ConfigError", "DeepAgent", "EpisodeMetrics", "LearnConfig",
    "MobilityParams", "RandomAgent", "ReplayMemory", "RunSummary", "SimConfig",
    "StepOutcome", "StepRecord", "TabularAgent", "TraceRecord", "Transition",
    "TuState", "UavMecEnv", "ValueNet", "ddqn_target", "dqn_target",
    "epsilon_schedule", "load_agent", "make_agent", "robustness_sweep",
    "run_evaluation", "run_training", "save_agent", "select_action_qos",
    "trajectory_trace",
]
