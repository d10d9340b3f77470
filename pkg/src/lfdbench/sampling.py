"""Demonstration acquisition: Human-Centric batch collection and
Robot-Centric iterative aggregation (DAgger)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import CONTINUOUS, Dataset, RandomSource, Trajectory

log = logging.getLogger(__name__)

INITIAL_TAG = "initial-demo"


@dataclass(frozen=True)
class HcConfig:
    n_demos: int
    learner: Any

    def __post_init__(self):
        if self.n_demos < 1:
            raise ValueError("n_demos must be >= 1")


@dataclass(frozen=True)
class RcConfig:
    """``rollouts_per_iteration`` is either a constant or one count per iteration."""

    learner: Any
    m_initial: int = 1
    iterations: int = 0
    rollouts_per_iteration: int | tuple = 1
    beta: float = 0.0
    label_noise: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.m_initial < 0 or self.iterations < 0:
            raise ValueError("m_initial and iterations must be >= 0")
        if self.label_noise < 0:
            raise ValueError("label_noise is a standard deviation and must be >= 0")
        counts = self.schedule()
        if any(c < 1 for c in counts):
            raise ValueError("every iteration needs at least one rollout")

    def schedule(self) -> tuple[int, ...]:
        r = self.rollouts_per_iteration
        if isinstance(r, (int, np.integer)):
            return (int(r),) * self.iterations
        r = tuple(int(c) for c in r)
        if len(r) != self.iterations:
            raise ValueError(f"{len(r)} rollout counts given for {self.iterations} iterations")
        return r


def _labeller(supervisor, label_noise: float):
    if label_noise == 0.0:
        return supervisor.label
    if supervisor.control_kind != CONTINUOUS:
        raise TypeError("Gaussian label noise applies to continuous controls only")

    def noisy(state, rng):
        u = supervisor.label(state, rng)
        return u + rng.normal(label_noise, len(u))
    return noisy


def supervisor_demo(env, supervisor, horizon: int, rng: RandomSource,
                    label_noise: float = 0.0) -> tuple[Trajectory, list]:
    """One demonstration; the demonstrator executes exactly what it labels."""
    label, step = _labeller(supervisor, label_noise), env.step
    states, labels = [], []
    x = env.initial_state(rng)
    for t in range(horizon + 1):
        u = label(x, rng)
        states.append(x)
        labels.append(u)
        if t < horizon:
            x = step(x, u, rng)
    return Trajectory(tuple(states), tuple(labels)), labels


def hc_collect(env, supervisor, n: int, horizon: int, rng: RandomSource,
               label_noise: float = 0.0, tag: str = INITIAL_TAG):
    if n < 1:
        raise ValueError("n must be >= 1")
    data = Dataset()
    trajs = []
    for _ in range(n):
        traj, labels = supervisor_demo(env, supervisor, horizon, rng, label_noise)
        data.add_trajectory(traj.states, labels, tag)
        trajs.append(traj)
    return data, trajs


def hc_train(data: Dataset, learner, rng: RandomSource | None = None):
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    return learner.fit(data, rng)


def robot_rollout(env, policy, supervisor, horizon: int, rng: RandomSource,
                  beta: float = 0.0, label_noise: float = 0.0) -> tuple[Trajectory, list]:
    """Roll out ``policy`` (mixed with the supervisor at rate ``beta``) and
    collect supervisor labels for every visited state."""
    label_of, step = _labeller(supervisor, label_noise), env.step
    states, executed, labels = [], [], []
    x = env.initial_state(rng)
    for t in range(horizon + 1):
        label = label_of(x, rng)
        if beta >= 1.0 or (beta > 0.0 and rng.random() < beta):
            u = label
        else:
            u = policy(x)
        states.append(x)
        executed.append(u)
        labels.append(label)
        if t < horizon:
            x = step(x, u, rng)
    return Trajectory(tuple(states), tuple(executed)), labels


@dataclass
class RcResult:
    policy: Any
    dataset: Dataset
    policies: list = field(default_factory=list)  # theta_0 .. theta_K
    sizes: list = field(default_factory=list)  # |D_0| .. |D_K|
    trajectories: list = field(default_factory=list)

    @property
    def n_demos(self) -> int:
        return self.dataset.n_trajectories


def rc_dagger(env, supervisor, cfg: RcConfig, horizon: int, rng: RandomSource,
              initial: Dataset | None = None) -> RcResult:
    """DAgger with equal per-example weight on the aggregate.

    ``initial`` preloads D_0 instead of collecting ``cfg.m_initial`` demos.
    """
    schedule = cfg.schedule()
    if initial is None:
        if cfg.m_initial < 1:
            raise ValueError("RC needs at least one initial demonstration")
        data, trajs = hc_collect(env, supervisor, cfg.m_initial, horizon, rng, cfg.label_noise)
    else:
        if len(initial) == 0:
            raise ValueError("preloaded dataset is empty")
        data = Dataset()
        for k in range(initial.n_trajectories):
            part = initial.trajectory_slice(k, k + 1)
            data.add_trajectory(part.states, part.labels, INITIAL_TAG)
        trajs = []
    policy = cfg.learner.fit(data, rng)
    result = RcResult(policy, data, [policy], [len(data)], list(trajs))
    for k, n_roll in enumerate(schedule, start=1):
        for _ in range(n_roll):
            traj, labels = robot_rollout(env, policy, supervisor, horizon, rng,
                                         cfg.beta, cfg.label_noise)
            data.add_trajectory(traj.states, labels, f"rc-iteration-{k}")
            result.trajectories.append(traj)
        policy = cfg.learner.fit(data, rng)
        result.policies.append(policy)
        result.sizes.append(len(data))
        log.debug("rc iteration %d: |D|=%d", k, len(data))
    result.policy = policy
    return result


def data_equalized_schedule(total_demos: int, cfg: RcConfig) -> list[int]:
    """Per-iteration rollout counts so RC consumes ``total_demos`` trajectories.

    ``cfg`` supplies ``m_initial`` and the iteration count ``K``; the
    remaining demos are split evenly with the remainder on the last iteration.
    """
    m, k = cfg.m_initial, cfg.iterations
    if total_demos < m:
        raise ValueError(f"budget {total_demos} is below the {m} initial demos")
    rest = total_demos - m
    if rest == 0:
        return []
    if not k:
        raise ValueError("a positive iteration count is needed to spend the remaining budget")
    base = rest // k
    counts = [base] * k
    counts[-1] += rest - base * k
    if any(c < 1 for c in counts):
        raise ValueError(f"{rest} demos cannot fill {k} iterations")
    return counts
