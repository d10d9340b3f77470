"""Shared domain types, trajectory rollout and surrogate losses."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Iterable, Protocol, Sequence

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"

_SEED_LIMIT = 2**64


class VariantMismatchError(TypeError):
    """A discrete control met a continuous one (or two different action sets)."""


class RandomSource:
    """Seeded, splittable random stream.

    Child streams depend only on ``(seed, spawn_key)``, never on how many
    draws the parent has made, so trial ``i`` sees the same numbers no matter
    which worker runs it or in what order.
    """

    __slots__ = ("seed", "spawn_key", "gen")

    def __init__(self, seed: int, spawn_key: Sequence[int] = ()):
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(int(k) for k in spawn_key)
        seq = np.random.SeedSequence(seed, spawn_key=self.spawn_key)
        self.gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, self.spawn_key + (int(index),))

    def random(self) -> float:
        return self.gen.random()

    def integers(self, high: int) -> int:
        return int(self.gen.integers(high))

    def normal(self, std: float, size: int) -> np.ndarray:
        return self.gen.normal(0.0, std, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, spawn_key={self.spawn_key})"


def control_kind(u: Any) -> str:
    if isinstance(u, (enum.Enum, int, np.integer)):
        return DISCRETE
    if isinstance(u, (np.ndarray, tuple, list)):
        return CONTINUOUS
    raise VariantMismatchError(f"not a control: {u!r}")


class Environment(Protocol):
    control_kind: str
    horizon: int

    def initial_state(self, rng: RandomSource) -> Any: ...

    def step(self, state: Any, control: Any, rng: RandomSource) -> Any: ...


class Policy(Protocol):
    control_kind: str

    def predict(self, state: Any) -> Any: ...

    def __call__(self, state: Any) -> Any: ...


@dataclass(frozen=True)
class Trajectory:
    """``horizon + 1`` visited states with the control recorded at each."""

    states: tuple
    controls: tuple

    def __post_init__(self):
        if len(self.states) != len(self.controls):
            raise ValueError("states and controls differ in length")
        if len(self.states) < 2:
            raise ValueError("a trajectory needs at least two pairs (horizon >= 1)")

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    @property
    def pairs(self) -> list[tuple]:
        return list(zip(self.states, self.controls))

    def __len__(self) -> int:
        return len(self.states)


class Dataset:
    """Append-only multiset of (state, label) pairs.

    Each appended trajectory keeps a provenance tag (``"initial-demo"`` or
    ``"rc-iteration-k"``) and its boundary so held-out splits can be cut on
    whole trajectories.
    """

    def __init__(self):
        self.states: list = []
        self.labels: list = []
        self.provenance: list[str] = []
        self.boundaries: list[int] = []

    def add_trajectory(self, states: Sequence, labels: Sequence, tag: str) -> None:
        if len(states) != len(labels):
            raise ValueError("states and labels differ in length")
        self.states.extend(states)
        self.labels.extend(labels)
        self.provenance.extend([tag] * len(states))
        self.boundaries.append(len(self.states))

    @property
    def items(self) -> list[tuple]:
        return list(zip(self.states, self.labels))

    @property
    def n_trajectories(self) -> int:
        return len(self.boundaries)

    def trajectory_slice(self, start: int, stop: int | None = None) -> "Dataset":
        """New dataset holding trajectories ``start:stop`` of this one."""
        ends = self.boundaries[start:stop]
        out = Dataset()
        lo = self.boundaries[start - 1] if start > 0 else 0
        for hi in ends:
            out.add_trajectory(self.states[lo:hi], self.labels[lo:hi], self.provenance[lo])
            lo = hi
        return out

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.states, self.labels))


def _check_variant(a: str, b: str, what: str) -> None:
    if a != b:
        raise VariantMismatchError(f"{what}: {a} control used where {b} is expected")


def rollout(env: Environment, policy: Policy, horizon: int, rng: RandomSource) -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    _check_variant(policy.control_kind, env.control_kind, "rollout")
    states, controls = [], []
    x = env.initial_state(rng)
    for t in range(horizon + 1):
        u = policy(x)
        states.append(x)
        controls.append(u)
        if t < horizon:
            x = env.step(x, u, rng)
    return Trajectory(tuple(states), tuple(controls))


def surrogate_loss(u1: Any, u2: Any) -> float:
    """0/1 disagreement for discrete controls, squared distance for continuous."""
    k1, k2 = control_kind(u1), control_kind(u2)
    _check_variant(k1, k2, "surrogate_loss")
    if k1 == DISCRETE:
        if isinstance(u1, enum.Enum) and isinstance(u2, enum.Enum) and type(u1) is not type(u2):
            raise VariantMismatchError(f"{type(u1).__name__} vs {type(u2).__name__}")
        return float(u1 != u2)
    a, b = np.asarray(u1, dtype=float), np.asarray(u2, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise VariantMismatchError("continuous controls must have the same dimension")
    d = a - b
    return float(d @ d)


def surrogate_loss_per_dim(u1: Any, u2: Any) -> np.ndarray:
    """Squared error per control dimension; summing it gives ``surrogate_loss``."""
    _check_variant(control_kind(u1), CONTINUOUS, "surrogate_loss_per_dim")
    _check_variant(control_kind(u2), CONTINUOUS, "surrogate_loss_per_dim")
    d = np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float)
    return d * d


def state_loss(policy: Policy, supervisor: Any, states: Iterable) -> float:
    return sum(surrogate_loss(policy(x), supervisor(x)) for x in states)


def trajectory_loss(policy: Policy, supervisor: Any, traj: Trajectory) -> float:
    """Total disagreement between ``policy`` and ``supervisor`` on the visited states."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return state_loss(policy, supervisor, traj.states)
