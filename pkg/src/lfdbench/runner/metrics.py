"""Evaluation metrics: normalized performance, held-out surrogate loss, and
Pearson correlation."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..core import CONTINUOUS, DISCRETE, Dataset, RandomSource, surrogate_loss, surrogate_loss_per_dim
from ..envs import DivergenceError, GridWorld, PointMassEnv


class BaselineError(ValueError):
    """The supervisor's mean grid return is too small to divide by."""


class TabularPolicy:
    """A grid policy evaluated once per cell and then looked up."""

    control_kind = DISCRETE

    def __init__(self, world: GridWorld, policy):
        self.width = world.width
        self.table = tuple(policy(c) for c in world.cells())

    def __call__(self, s):
        return self.table[s[1] * self.width + s[0]]

    predict = __call__


def grid_return(world: GridWorld, policy, horizon: int, rng: RandomSource) -> float:
    """Reward collected on the cells occupied at steps ``1..horizon``."""
    x = world.initial_state(rng)
    total = 0.0
    for _ in range(horizon):
        x = world.step(x, policy(x), rng)
        total += world.rewards[world.index(x)]
    return total


def pointmass_cost(env: PointMassEnv, policy, horizon: int, rng: RandomSource,
                   Q=None, Rc=None) -> float:
    """Quadratic cost summed over all ``horizon + 1`` visited states."""
    Q = np.eye(4) if Q is None else Q
    Rc = np.eye(2) if Rc is None else Rc
    x = env.initial_state(rng)
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(horizon + 1):
            u = policy(x)
            total += float(x @ Q @ x + u @ Rc @ u)
            if not np.isfinite(total):
                return np.inf
            if t < horizon:
                x = env.step(x, u, rng)
    return total


def episode_scores(policy, env, n_eval: int, horizon: int, rng: RandomSource) -> np.ndarray:
    """Per-episode return (grid) or cost (point mass).

    Episode ``i`` always uses ``rng.child(i)``, so two policies evaluated
    with the same ``rng`` face identical start states and noise draws.
    A diverging point-mass episode scores ``inf``.
    """
    if n_eval < 1:
        raise ValueError("n_eval must be >= 1")
    if isinstance(env, GridWorld):
        if not isinstance(policy, TabularPolicy):
            policy = TabularPolicy(env, policy)
        return np.array([grid_return(env, policy, horizon, rng.child(i)) for i in range(n_eval)])
    out = np.empty(n_eval)
    for i in range(n_eval):
        try:
            out[i] = pointmass_cost(env, policy, horizon, rng.child(i))
        except DivergenceError:
            out[i] = np.inf
    return out


def baseline_floor(world: GridWorld, horizon: int) -> float:
    return min(world.reward_penalty, 0.0) * horizon


def grid_ratio(policy_mean: float, supervisor_mean: float, world: GridWorld, horizon: int,
               shift: bool = False) -> float:
    """``policy_mean / supervisor_mean``; with ``shift`` both are first lifted
    by the worst possible return ``-10 * horizon``."""
    if shift:
        floor = baseline_floor(world, horizon)
        return (policy_mean - floor) / (supervisor_mean - floor)
    if supervisor_mean < world.reward_goal:
        raise BaselineError(
            f"supervisor baseline {supervisor_mean:.3g} is below one goal step; "
            "use the shifted ratio")
    return policy_mean / supervisor_mean


def cost_ratio(policy_cost: float, supervisor_cost: float) -> float:
    if not math.isfinite(policy_cost):
        return 0.0
    return supervisor_cost / policy_cost


def normalized_performance(policy, env, supervisor, n_eval: int, horizon: int,
                           rng: RandomSource, shift: bool = False) -> float:
    """1.0 means supervisor parity.

    Grid: ratio of mean returns. Point mass: supervisor cost over policy cost.
    """
    pol = episode_scores(policy, env, n_eval, horizon, rng).mean()
    sup = episode_scores(supervisor, env, n_eval, horizon, rng).mean()
    if isinstance(env, GridWorld):
        return grid_ratio(pol, sup, env, horizon, shift)
    return cost_ratio(pol, sup)


def heldout_surrogate_loss(policy, heldout: Dataset) -> np.ndarray:
    """Mean loss per control dimension (a single 0/1 rate for discrete controls)."""
    if len(heldout) == 0:
        raise ValueError("held-out set is empty")
    if policy.control_kind == CONTINUOUS:
        per = np.array([surrogate_loss_per_dim(policy(s), u) for s, u in heldout])
        return per.mean(axis=0)
    return np.array([np.mean([surrogate_loss(policy(s), u) for s, u in heldout])])


def pearson_correlation(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("sequences must be one-dimensional and of equal length")
    if len(a) < 2:
        raise ValueError("need at least two points")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(da @ da), math.sqrt(db @ db)
    if sa == 0.0 or sb == 0.0:
        raise ValueError("correlation is undefined for a constant sequence")
    return float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))
