"""Benchmark environments: stochastic grid world, two-region point mass, and
the three-step binary DAG used for the RC counterexample."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
import scipy.sparse as sp

from .core import CONTINUOUS, DISCRETE, RandomSource


class Action(IntEnum):
    LEFT = 0
    RIGHT = 1
    FORWARD = 2
    BACKWARD = 3
    STAY = 4


# (dcol, drow); Forward is +row.
MOVES = {
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.FORWARD: (0, 1),
    Action.BACKWARD: (0, -1),
    Action.STAY: (0, 0),
}
ACTIONS = tuple(Action)


class DivergenceError(ArithmeticError):
    """The point-mass state left the finite floats; the driving policy is unstable."""


# ---------------------------------------------------------------------------
# Grid world


@dataclass(frozen=True, eq=False)
class GridWorld:
    width: int
    height: int
    goal: tuple[int, int]
    penalties: frozenset
    slip_prob: float = 0.16
    horizon: int = 30
    reward_goal: float = 10.0
    reward_penalty: float = -10.0

    control_kind = DISCRETE
    actions = ACTIONS

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have positive size")
        if not 0.0 <= self.slip_prob <= 1.0:
            raise ValueError(f"slip_prob must lie in [0, 1], got {self.slip_prob}")
        object.__setattr__(self, "goal", tuple(self.goal))
        object.__setattr__(self, "penalties", frozenset(tuple(c) for c in self.penalties))
        for c in (self.goal, *self.penalties):
            if not self.in_bounds(c):
                raise ValueError(f"cell {c} outside {self.width}x{self.height} grid")
        if self.goal in self.penalties:
            raise ValueError("goal cell cannot be a penalty cell")

        n = self.width * self.height
        nxt = np.empty((n, len(ACTIONS)), dtype=np.int64)
        for i in range(n):
            col, row = self.cell(i)
            for a, (dc, dr) in MOVES.items():
                c2, r2 = col + dc, row + dr
                nxt[i, a] = self.index((c2, r2)) if self.in_bounds((c2, r2)) else i
        rewards = np.zeros(n)
        for c in self.penalties:
            rewards[self.index(c)] = self.reward_penalty
        rewards[self.index(self.goal)] = self.reward_goal
        free = [self.cell(i) for i in range(n)
                if self.cell(i) != self.goal and self.cell(i) not in self.penalties]
        object.__setattr__(self, "_next", nxt)
        object.__setattr__(self, "_next_list", nxt.tolist())
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "free_cells", tuple(free))

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def in_bounds(self, c) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def index(self, c) -> int:
        return c[1] * self.width + c[0]

    def cell(self, i: int) -> tuple[int, int]:
        return (i % self.width, i // self.width)

    def cells(self):
        return [self.cell(i) for i in range(self.n_cells)]

    def initial_state(self, rng: RandomSource) -> tuple[int, int]:
        starts = self.free_cells or (self.goal,)
        return starts[rng.integers(len(starts))]

    def step(self, s, a, rng: RandomSource) -> tuple[int, int]:
        return gridworld_step(self, s, a, rng)

    def reward(self, s) -> float:
        return gridworld_reward(self, s)

    def transition_matrices(self) -> list[sp.csr_matrix]:
        """Exact ``P[a][s, s']`` under the slip model, one sparse matrix per action."""
        n = self.n_cells
        rows = np.arange(n)
        mats = []
        for a in ACTIONS:
            others = [b for b in ACTIONS if b != a]
            data = [np.full(n, 1.0 - self.slip_prob)]
            cols = [self._next[:, a]]
            for b in others:
                data.append(np.full(n, self.slip_prob / len(others)))
                cols.append(self._next[:, b])
            m = sp.csr_matrix(
                (np.concatenate(data), (np.tile(rows, len(data)), np.concatenate(cols))),
                shape=(n, n),
            )
            mats.append(m)
        return mats

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "goal": list(self.goal),
            "penalties": sorted(list(c) for c in self.penalties),
            "slip_prob": self.slip_prob,
        }

    @classmethod
    def from_json(cls, doc: dict | str, **overrides) -> "GridWorld":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(
            width=int(doc["width"]),
            height=int(doc["height"]),
            goal=tuple(doc["goal"]),
            penalties=frozenset(tuple(c) for c in doc["penalties"]),
            slip_prob=float(doc["slip_prob"]),
            **overrides,
        )


def gridworld_generate(rng: RandomSource, width: int = 15, height: int = 15,
                       penalty_frac: float = 0.08, slip_prob: float = 0.16,
                       horizon: int = 30) -> GridWorld:
    """Random world: ``floor(penalty_frac * cells)`` penalties, then one goal, all
    drawn without replacement."""
    n = width * height
    if n < 2:
        raise ValueError("grid needs at least two cells")
    if not 0.0 <= penalty_frac < 1.0:
        raise ValueError(f"penalty_frac must lie in [0, 1), got {penalty_frac}")
    k = math.floor(penalty_frac * n)
    if k >= n:
        raise ValueError(f"{k} penalties leave no cell for the goal")
    order = rng.permutation(n)
    cell = lambda i: (int(i) % width, int(i) // width)
    penalties = frozenset(cell(i) for i in order[:k])
    return GridWorld(width, height, goal=cell(order[k]), penalties=penalties,
                     slip_prob=slip_prob, horizon=horizon)


def gridworld_step(world: GridWorld, s, a, rng: RandomSource) -> tuple[int, int]:
    if not world.in_bounds(s):
        raise ValueError(f"cell {s} out of bounds")
    a = Action(a)
    if world.slip_prob > 0.0 and rng.random() < world.slip_prob:
        # Uniform over the other four outcomes of the 5-move neighbourhood.
        j = rng.integers(len(ACTIONS) - 1)
        a = ACTIONS[j if j < a else j + 1]
    return world.cell(world._next_list[world.index(s)][a])


def gridworld_reward(world: GridWorld, s) -> float:
    if not world.in_bounds(s):
        raise ValueError(f"cell {s} out of bounds")
    return float(world.rewards[world.index(s)])


# ---------------------------------------------------------------------------
# Point mass


def _input_matrix(mass: float) -> np.ndarray:
    b = np.zeros((4, 2))
    b[2, 0] = b[3, 1] = 1.0 / mass
    return b


def _drift_matrix() -> np.ndarray:
    a = np.eye(4)
    a[0, 2] = a[1, 3] = 1.0
    return a


@dataclass(frozen=True, eq=False)
class PointMassEnv:
    """Double integrator with state ``(x, y, vx, vy)`` whose mass jumps from
    ``mass1`` to ``mass2`` inside the quadrant ``x > bound and y > bound``."""

    noise_scale: float = 0.1
    mass1: float = 1.0
    mass2: float = 4.0
    region_bound: float = 12.0
    start: tuple = (-15.0, -10.0, 0.0, 0.0)
    horizon: int = 35
    A: np.ndarray = field(default_factory=_drift_matrix)

    control_kind = CONTINUOUS

    def __post_init__(self):
        if self.noise_scale < 0:
            raise ValueError("noise_scale is a variance and must be >= 0")
        object.__setattr__(self, "B1", _input_matrix(self.mass1))
        object.__setattr__(self, "B2", _input_matrix(self.mass2))
        object.__setattr__(self, "_noise_std", math.sqrt(self.noise_scale))

    def in_region2(self, s) -> bool:
        return s[0] > self.region_bound and s[1] > self.region_bound

    def input_matrix(self, s) -> np.ndarray:
        return self.B2 if self.in_region2(s) else self.B1

    def initial_state(self, rng: RandomSource) -> np.ndarray:
        return np.array(self.start, dtype=float)

    def step(self, s, u, rng: RandomSource) -> np.ndarray:
        return pointmass_step(self, s, u, rng)


def pointmass_step(env: PointMassEnv, s, u, rng: RandomSource) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        nxt = env.A @ s + env.input_matrix(s) @ u
        if env.noise_scale > 0.0:
            nxt = nxt + rng.normal(env._noise_std, 4)
    if not np.all(np.isfinite(nxt)):
        raise DivergenceError(f"non-finite point-mass state from {s} under control {u}")
    return nxt


# ---------------------------------------------------------------------------
# DAG


class Branch(IntEnum):
    L = 0
    R = 1


ROOT, NODE_L, NODE_R, NODE_LL, NODE_LR, NODE_RL, NODE_RR = range(7)
NODE_NAMES = ("root", "l", "r", "ll", "lr", "rl", "rr")
CHILDREN = {ROOT: (NODE_L, NODE_R), NODE_L: (NODE_LL, NODE_LR), NODE_R: (NODE_RL, NODE_RR)}
LEFT_SUBTREE = frozenset({NODE_L, NODE_LL, NODE_LR})
RIGHT_SUBTREE = frozenset({NODE_R, NODE_RL, NODE_RR})


@dataclass(frozen=True)
class DagEnv:
    """Depth-2 binary tree entered at the root; three decision epochs.

    Under ``L`` the root slips to the right child with probability ``mu``;
    every other transition is deterministic.
    """

    mu: float = 0.25
    horizon: int = 2

    control_kind = DISCRETE
    actions = tuple(Branch)

    def __post_init__(self):
        if not 0.0 <= self.mu <= 0.25:
            raise ValueError(f"mu must lie in [0, 1/4], got {self.mu}")

    def initial_state(self, rng: RandomSource) -> int:
        return ROOT

    def step(self, s: int, theta, rng: RandomSource) -> int:
        return dag_step(self, s, theta, rng)


def dag_step(env: DagEnv, s: int, theta, rng: RandomSource) -> int:
    if s not in CHILDREN:
        raise ValueError(f"node {NODE_NAMES[s]} is a leaf")
    left, right = CHILDREN[s]
    if s == ROOT and theta == Branch.L:
        return right if rng.random() < env.mu else left
    return right if theta == Branch.R else left
