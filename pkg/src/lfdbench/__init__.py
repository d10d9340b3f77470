"""Benchmark harness comparing human-centric (behavioral cloning) and
robot-centric (DAgger) sampling for learning from demonstration."""

from .core import Dataset, RandomSource, Trajectory, rollout, surrogate_loss
from .envs import DagEnv, GridWorld, PointMassEnv, gridworld_generate
from .sampling import HcConfig, RcConfig, hc_collect, hc_train, rc_dagger

__version__ = "0.1.0"

__all__ = [
    "Dataset", "RandomSource", "Trajectory", "rollout", "surrogate_loss",
    "DagEnv", "GridWorld", "PointMassEnv", "gridworld_generate",
    "HcConfig", "RcConfig", "hc_collect", "hc_train", "rc_dagger",
]
