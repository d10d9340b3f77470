"""Policy classes of increasing expressiveness and their fitting routines.

* ``LinearClassifier``: one-vs-rest L2 hinge loss on normalized grid
  coordinates, trained with SGD.
* ``DecisionTree``: greedy CART with Gini impurity.
* ``AffinePolicy``: ridge least squares on ``(state, 1)``.
* ``ConstantPolicy``: majority vote over ``{L, R}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import CONTINUOUS, DISCRETE, Dataset, RandomSource
from .envs import ACTIONS, Action, Branch


class EmptyDatasetError(ValueError):
    pass


class SingularDesignError(np.linalg.LinAlgError):
    pass


def _require_data(data: Dataset) -> None:
    if len(data) == 0:
        raise EmptyDatasetError("cannot fit a policy to an empty dataset")


# ---------------------------------------------------------------------------
# Linear classifier


@numba.njit(cache=True)
def _ovr_hinge_sgd(X, y, order, n_classes, lam, step0):
    n_epochs, n = order.shape
    d = X.shape[1]
    w = np.zeros((n_classes, d))
    avg = np.zeros((n_classes, d))
    snapshots = np.zeros((n_epochs, n_classes, d))
    t = 0
    for e in range(n_epochs):
        for j in range(n):
            i = order[e, j]
            t += 1
            eta = step0 / np.sqrt(t)
            for a in range(n_classes):
                sign = 1.0 if y[i] == a else -1.0
                margin = 0.0
                for k in range(d):
                    margin += w[a, k] * X[i, k]
                margin *= sign
                for k in range(d):
                    g = lam * w[a, k]
                    if margin < 1.0:
                        g -= sign * X[i, k]
                    w[a, k] -= eta * g
            # running mean of all iterates
            for a in range(n_classes):
                for k in range(d):
                    avg[a, k] += (w[a, k] - avg[a, k]) / t
        snapshots[e] = avg
    return avg, snapshots


def ovr_hinge_objective(weights: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Sum over classes of ``lam/2 |w_a|^2 + mean hinge``."""
    signs = np.where(y[:, None] == np.arange(weights.shape[0])[None, :], 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - signs * (X @ weights.T))
    return float(0.5 * lam * np.sum(weights * weights) + hinge.mean(axis=0).sum())


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    weights: np.ndarray  # (n_actions, 3) over (x, y, 1)
    scale: tuple
    actions: tuple = ACTIONS
    lam: float = 1e-3
    epochs: int = 50
    history: tuple = ()

    control_kind = DISCRETE

    def features(self, s) -> np.ndarray:
        return np.array([s[0] / self.scale[0], s[1] / self.scale[1], 1.0])

    def predict(self, s):
        return self.actions[int(np.argmax(self.weights @ self.features(s)))]

    __call__ = predict

    def to_json(self) -> dict:
        return {"type": "linear", "weights": self.weights.tolist(), "scale": list(self.scale),
                "actions": [a.name for a in self.actions], "lam": self.lam, "epochs": self.epochs}


def grid_features(states, scale) -> np.ndarray:
    s = np.asarray(states, dtype=float).reshape(-1, 2)
    return np.column_stack([s[:, 0] / scale[0], s[:, 1] / scale[1], np.ones(len(s))])


def fit_linear_classifier(data: Dataset, lam: float = 1e-3, epochs: int = 50,
                          rng: RandomSource | None = None, scale=(14, 14),
                          actions=ACTIONS, step: float = 0.1) -> LinearClassifier:
    """SGD with step ``step / sqrt(t)``; the returned weights are the average
    of all iterates. ``history`` holds the objective of that average after
    each epoch."""
    _require_data(data)
    if rng is None:
        raise ValueError("fit_linear_classifier needs a RandomSource for shuffling")
    scale = tuple(float(max(c, 1)) for c in scale)
    X = grid_features(data.states, scale)
    y = np.array([int(u) for u in data.labels], dtype=np.int64)
    order = np.stack([rng.permutation(len(y)) for _ in range(epochs)]) if epochs else \
        np.zeros((0, len(y)), dtype=np.int64)
    avg, snaps = _ovr_hinge_sgd(X, y, order, len(actions), float(lam), float(step))
    history = tuple(ovr_hinge_objective(w, X, y, lam) for w in snaps)
    return LinearClassifier(avg, scale, tuple(actions), lam, epochs, history)


# ---------------------------------------------------------------------------
# Decision tree


@dataclass(eq=False)
class TreeNode:
    action: object
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_json(self) -> dict:
        if self.is_leaf:
            return {"action": self.action.name}
        return {"action": self.action.name, "feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_json(), "right": self.right.to_json()}


@dataclass(frozen=True, eq=False)
class DecisionTree:
    root: TreeNode
    max_depth: int
    actions: tuple = ACTIONS

    control_kind = DISCRETE

    def predict(self, s):
        node = self.root
        while node.left is not None:
            node = node.left if s[node.feature] <= node.threshold else node.right
        return node.action

    __call__ = predict

    @property
    def depth(self) -> int:
        def walk(n):
            return 0 if n.is_leaf else 1 + max(walk(n.left), walk(n.right))
        return walk(self.root)

    def to_json(self) -> dict:
        return {"type": "tree", "max_depth": self.max_depth,
                "actions": [a.name for a in self.actions], "root": self.root.to_json()}


def _gini(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    return np.where(n > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


def _best_split(X: np.ndarray, counts: np.ndarray):
    """Lowest weighted Gini over midpoints between distinct sorted values.

    Returns ``(feature, threshold)`` or ``None`` when all points coincide.
    Ties go to the lower feature index, then the smaller threshold.
    """
    total = counts.sum()
    best = None
    best_score = np.inf
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(counts[order], axis=0)
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        left = cum[cut]
        right = cum[-1] - left
        nl, nr = left.sum(axis=1), right.sum(axis=1)
        score = (nl * _gini(left) + nr * _gini(right)) / total
        j = int(np.argmin(score))
        if score[j] < best_score - 1e-12:
            best_score = score[j]
            best = (f, 0.5 * (xs[cut[j]] + xs[cut[j] + 1]))
    return best


def fit_decision_tree(data: Dataset, max_depth: int = 100, actions=ACTIONS) -> DecisionTree:
    """CART grown on distinct feature points weighted by per-class counts
    (identical to growing on the raw multiset)."""
    _require_data(data)
    index = {a: i for i, a in enumerate(actions)}
    agg: dict[tuple, np.ndarray] = {}
    for s, u in data:
        key = tuple(float(v) for v in s)
        if key not in agg:
            agg[key] = np.zeros(len(actions))
        agg[key][index[u]] += 1
    X = np.array(list(agg.keys()))
    C = np.array(list(agg.values()))

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        counts = C[rows]
        totals = counts.sum(axis=0)
        node = TreeNode(actions[int(np.argmax(totals))])
        if np.count_nonzero(totals) <= 1 or depth >= max_depth:
            return node
        split = _best_split(X[rows], counts)
        if split is None:
            return node
        f, thr = split
        mask = X[rows, f] <= thr
        node.feature, node.threshold = f, float(thr)
        node.left = grow(rows[mask], depth + 1)
        node.right = grow(rows[~mask], depth + 1)
        return node

    return DecisionTree(grow(np.arange(len(X)), 0), max_depth, tuple(actions))


# ---------------------------------------------------------------------------
# Affine least squares


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    M: np.ndarray
    b: np.ndarray
    ridge: float = 1e-6

    control_kind = CONTINUOUS

    def predict(self, s) -> np.ndarray:
        return self.M @ np.asarray(s, dtype=float) + self.b

    __call__ = predict

    def to_json(self) -> dict:
        return {"type": "affine", "M": self.M.tolist(), "b": self.b.tolist(), "ridge": self.ridge}


def ridge_objective(M, b, X, U, ridge) -> float:
    r = X @ np.asarray(M).T + np.asarray(b) - U
    return float(np.sum(r * r) + ridge * (np.sum(np.square(M)) + np.sum(np.square(b))))


def fit_least_squares(data: Dataset, ridge: float = 1e-6) -> AffinePolicy:
    _require_data(data)
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    X = np.asarray(data.states, dtype=float)
    U = np.asarray(data.labels, dtype=float)
    Z = np.column_stack([X, np.ones(len(X))])
    G = Z.T @ Z + ridge * np.eye(Z.shape[1])
    if ridge == 0 and np.linalg.matrix_rank(G) < G.shape[0]:
        raise SingularDesignError("normal matrix is singular; use a nonzero ridge")
    W = np.linalg.solve(G, Z.T @ U)
    return AffinePolicy(W[:-1].T.copy(), W[-1].copy(), ridge)


# ---------------------------------------------------------------------------
# Majority vote


@dataclass(frozen=True)
class ConstantPolicy:
    theta: Branch

    control_kind = DISCRETE

    def predict(self, s) -> Branch:
        return self.theta

    __call__ = predict

    def to_json(self) -> dict:
        return {"type": "constant", "theta": self.theta.name}


_CONSTANT = {b: ConstantPolicy(b) for b in Branch}


def fit_majority_vote(data: Dataset, tie_break: Branch = Branch.L) -> ConstantPolicy:
    _require_data(data)
    if tie_break != Branch.L:
        raise ValueError("only the L tie-break is supported")
    n_left, n_right = data.labels.count(Branch.L), data.labels.count(Branch.R)
    # IntEnum equality would let e.g. grid actions with the same values through
    if n_left + n_right != len(data) or set(map(type, data.labels)) != {Branch}:
        raise ValueError(f"majority vote needs labels in {{L, R}}, got {set(data.labels)}")
    return _CONSTANT[Branch.R] if n_right > n_left else _CONSTANT[Branch.L]


# ---------------------------------------------------------------------------
# Learner objects: bind hyperparameters so sampling code can refit uniformly.


@dataclass(frozen=True)
class LinearLearner:
    scale: tuple = (14, 14)
    lam: float = 1e-3
    epochs: int = 50
    step: float = 0.1
    name = "linear"

    def fit(self, data: Dataset, rng: RandomSource | None = None) -> LinearClassifier:
        return fit_linear_classifier(data, self.lam, self.epochs, rng, self.scale, step=self.step)


@dataclass(frozen=True)
class TreeLearner:
    max_depth: int = 100
    name = "tree"

    def fit(self, data: Dataset, rng: RandomSource | None = None) -> DecisionTree:
        return fit_decision_tree(data, self.max_depth)


@dataclass(frozen=True)
class LeastSquaresLearner:
    ridge: float = 1e-6
    name = "least_squares"

    def fit(self, data: Dataset, rng: RandomSource | None = None) -> AffinePolicy:
        return fit_least_squares(data, self.ridge)


@dataclass(frozen=True)
class MajorityVoteLearner:
    name = "majority"

    def fit(self, data: Dataset, rng: RandomSource | None = None) -> ConstantPolicy:
        return fit_majority_vote(data)


# ---------------------------------------------------------------------------
# Serialization


def _node_from_json(doc: dict, lookup) -> TreeNode:
    node = TreeNode(lookup[doc["action"]])
    if "feature" in doc:
        node.feature = int(doc["feature"])
        node.threshold = float(doc["threshold"])
        node.left = _node_from_json(doc["left"], lookup)
        node.right = _node_from_json(doc["right"], lookup)
    return node


def _action_set(names) -> tuple:
    enum = Branch if set(names) <= {"L", "R"} else Action
    return tuple(enum[n] for n in names)


def policy_from_json(doc: dict | str):
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind = doc.get("type")
    if kind == "linear":
        actions = _action_set(doc["actions"])
        return LinearClassifier(np.array(doc["weights"], dtype=float), tuple(doc["scale"]),
                                actions, doc["lam"], doc["epochs"])
    if kind == "tree":
        actions = _action_set(doc["actions"])
        lookup = {a.name: a for a in actions}
        return DecisionTree(_node_from_json(doc["root"], lookup), doc["max_depth"], actions)
    if kind == "affine":
        return AffinePolicy(np.array(doc["M"], dtype=float), np.array(doc["b"], dtype=float),
                            doc["ridge"])
    if kind == "constant":
        return ConstantPolicy(Branch[doc["theta"]])
    raise ValueError(f"unknown policy type {kind!r}")
