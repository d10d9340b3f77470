"""Algorithmic supervisors: value iteration on the grid, switching LQR on the
point mass, the greedy DAG policy, and a label-flipping wrapper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CONTINUOUS, DISCRETE, RandomSource
from .envs import (
    ACTIONS,
    LEFT_SUBTREE,
    NODE_NAMES,
    ROOT,
    Action,
    Branch,
    GridWorld,
    PointMassEnv,
)

TIE_TOL = 1e-9


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# Value iteration


@dataclass(frozen=True, eq=False)
class ValueFunction:
    values: np.ndarray  # indexed by GridWorld.index(cell)
    gamma: float
    residual: float
    width: int
    height: int
    sweeps: int = 0

    def __getitem__(self, cell) -> float:
        return float(self.values[cell[1] * self.width + cell[0]])

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "residual": self.residual,
            "values": {f"{i % self.width},{i // self.width}": float(v)
                       for i, v in enumerate(self.values)},
        }


def bellman_backup(world: GridWorld, values: np.ndarray, gamma: float,
                   mats=None) -> np.ndarray:
    """Action values ``Q[s, a] = r(s) + gamma * E[V(s') | s, a]``."""
    mats = mats if mats is not None else world.transition_matrices()
    expected = np.column_stack([m @ values for m in mats])
    return world.rewards[:, None] + gamma * expected


def value_iteration(world: GridWorld, gamma: float = 0.99, tol: float = 1e-6,
                    max_sweeps: int = 100_000, init: np.ndarray | float | None = None,
                    trace: list | None = None) -> ValueFunction:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    mats = world.transition_matrices()
    v = np.zeros(world.n_cells) if init is None else np.broadcast_to(
        np.asarray(init, dtype=float), (world.n_cells,)).copy()
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        new = bellman_backup(world, v, gamma, mats).max(axis=1)
        residual = float(np.max(np.abs(new - v)))
        v = new
        if trace is not None:
            trace.append(v.copy())
        if residual <= tol:
            return ValueFunction(v, gamma, residual, world.width, world.height, sweep)
    raise ConvergenceError(f"value iteration did not converge in {max_sweeps} sweeps", residual)


def _first_max(q: np.ndarray) -> int:
    return int(np.flatnonzero(q >= q.max() - TIE_TOL * max(1.0, abs(q.max())))[0])


def vi_greedy_action(vf: ValueFunction, world: GridWorld, s) -> Action:
    if not world.in_bounds(s):
        raise ValueError(f"cell {s} out of bounds")
    i = world.index(s)
    q = np.array([world.rewards[i] + vf.gamma * (m[i] @ vf.values)
                  for m in world.transition_matrices()]).ravel()
    return ACTIONS[_first_max(q)]


class GridSupervisor:
    """Greedy policy of a converged value function, tabulated over all cells."""

    control_kind = DISCRETE

    def __init__(self, world: GridWorld, gamma: float = 0.99, tol: float = 1e-6,
                 vf: ValueFunction | None = None):
        self.world = world
        self.vf = vf if vf is not None else value_iteration(world, gamma, tol)
        q = bellman_backup(world, self.vf.values, self.vf.gamma)
        self.table = tuple(ACTIONS[_first_max(row)] for row in q)

    def __call__(self, s) -> Action:
        return self.table[self.world.index(s)]

    predict = __call__

    def label(self, s, rng: RandomSource | None = None) -> Action:
        return self(s)


# ---------------------------------------------------------------------------
# LQR


@dataclass(frozen=True, eq=False)
class LqrGain:
    K: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    Rc: np.ndarray
    iterations: int = 0

    def to_json(self) -> dict:
        return {k: np.asarray(getattr(self, k)).tolist() for k in ("K", "P", "Q", "Rc")}


def dare_residual(A, B, Q, Rc, P) -> float:
    A, B, Q, Rc, P = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, Rc, P))
    gain = np.linalg.solve(Rc + B.T @ P @ B, B.T @ P @ A)
    return float(np.max(np.abs(P - (Q + A.T @ P @ A - A.T @ P @ B @ gain))))


def solve_lqr(A, B, Q, Rc, tol: float = 1e-12, max_iter: int = 100_000) -> LqrGain:
    """Iterate the discrete Riccati map from ``P = Q`` to its fixed point.

    Convergence is declared when the max-norm update falls below
    ``tol * max(1, |P|)``. The control law is ``u = -K x``.
    """
    A, B, Q, Rc = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, Rc))
    P = Q.copy()
    change = np.inf
    for it in range(1, max_iter + 1):
        S = Rc + B.T @ P @ B
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(S, B.T @ P @ A)
        nxt = 0.5 * (nxt + nxt.T)
        if not np.all(np.isfinite(nxt)):
            raise ConvergenceError("Riccati iteration diverged; (A, B) is not stabilizable", change)
        change = float(np.max(np.abs(nxt - P)))
        P = nxt
        if change <= tol * max(1.0, float(np.max(np.abs(P)))):
            K = np.linalg.solve(Rc + B.T @ P @ B, B.T @ P @ A)
            return LqrGain(K, P, Q, Rc, it)
    raise ConvergenceError(f"Riccati iteration did not converge in {max_iter} steps", change)


class SwitchingLqrSupervisor:
    """``u = -K1 s`` in region 1 and ``u = -K2 s`` in region 2."""

    control_kind = CONTINUOUS

    def __init__(self, env: PointMassEnv, Q=None, Rc=None):
        self.env = env
        Q = np.eye(4) if Q is None else Q
        Rc = np.eye(2) if Rc is None else Rc
        self.gains = (solve_lqr(env.A, env.B1, Q, Rc), solve_lqr(env.A, env.B2, Q, Rc))

    def gain_for(self, s) -> LqrGain:
        return self.gains[1] if self.env.in_region2(s) else self.gains[0]

    def __call__(self, s) -> np.ndarray:
        return switching_lqr_supervisor(self.gains, s, self.env)

    predict = __call__

    def label(self, s, rng: RandomSource | None = None) -> np.ndarray:
        return self(s)


def switching_lqr_supervisor(gains, s, env: PointMassEnv | None = None) -> np.ndarray:
    env = env if env is not None else PointMassEnv()
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite state {s}")
    k = gains[1].K if env.in_region2(s) else gains[0].K
    return -(k @ s)


# ---------------------------------------------------------------------------
# DAG


_DAG_LABELS = tuple(Branch.L if s == ROOT or s in LEFT_SUBTREE else Branch.R
                    for s in range(len(NODE_NAMES)))


def dag_supervisor(s: int) -> Branch:
    """``L`` on the root and left subtree, ``R`` on the right subtree."""
    if not 0 <= s < len(_DAG_LABELS):
        raise ValueError(f"unknown DAG node {s}")
    return _DAG_LABELS[s]


class DagSupervisor:
    control_kind = DISCRETE

    def __call__(self, s: int) -> Branch:
        return dag_supervisor(s)

    predict = __call__

    def label(self, s, rng: RandomSource | None = None) -> Branch:
        return dag_supervisor(s)


# ---------------------------------------------------------------------------
# Label noise


def noisy_supervisor(inner, flip_prob: float, s, rng: RandomSource, actions=None):
    """Inner label with probability ``1 - flip_prob``, else a uniform action
    (which may coincide with the inner label)."""
    if getattr(inner, "control_kind", DISCRETE) != DISCRETE:
        raise TypeError("label flipping needs a discrete-action supervisor")
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError(f"flip_prob must lie in [0, 1], got {flip_prob}")
    actions = actions if actions is not None else ACTIONS
    if flip_prob > 0.0 and rng.random() < flip_prob:
        return actions[rng.integers(len(actions))]
    return inner(s)


class NoisySupervisor:
    """Wraps a discrete supervisor; ``label`` is noisy, ``__call__`` stays clean."""

    control_kind = DISCRETE

    def __init__(self, inner, flip_prob: float, actions=None):
        if getattr(inner, "control_kind", DISCRETE) != DISCRETE:
            raise TypeError("label flipping needs a discrete-action supervisor")
        if not 0.0 <= flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {flip_prob}")
        self.inner = inner
        self.flip_prob = flip_prob
        self.actions = tuple(actions) if actions is not None else ACTIONS

    def __call__(self, s):
        return self.inner(s)

    predict = __call__

    def label(self, s, rng: RandomSource):
        return noisy_supervisor(self.inner, self.flip_prob, s, rng, self.actions)
