"""Exact and simulated probabilities for the DAG counterexample.

With ``m`` initial demonstrations the majority vote picks ``R`` exactly when
more than ``3m/4`` of them took the rare right branch, so the RC learner's
starting point is ``R`` with probability ``P(Binomial(m, mu) > 3m/4)``. From
``R`` every RC rollout is labelled ``(L, R, R)`` and ``R`` never loses the
vote again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .core import RandomSource
from .envs import Branch, DagEnv
from .learners import MajorityVoteLearner, fit_majority_vote
from .sampling import RcConfig, hc_collect, rc_dagger
from .supervisors import DagSupervisor

MAX_EXACT_M = 10_000
ABSORPTION_ITERATIONS = 3


def stuck_threshold(m: int) -> int:
    """Smallest number of right-branch demos that makes ``R`` the majority."""
    return 3 * m // 4 + 1


def binomial_upper_tail(n: int, p: float, k: int) -> float:
    """``P(Binomial(n, p) >= k)`` summed in log space."""
    if k <= 0:
        return 1.0
    if k > n or p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    j = np.arange(k, n + 1)
    logc = (math.lgamma(n + 1)
            - np.array([math.lgamma(i + 1) + math.lgamma(n - i + 1) for i in j]))
    terms = logc + j * math.log(p) + (n - j) * math.log1p(-p)
    return float(min(1.0, math.exp(logsumexp(terms))))


def rc_stuck_probability_exact(m: int, mu: float) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > MAX_EXACT_M:
        raise ValueError(f"exact tail is capped at m = {MAX_EXACT_M}")
    if not 0.0 <= mu <= 0.25:
        raise ValueError(f"mu must lie in (0, 1/4], got {mu}")
    return binomial_upper_tail(m, mu, stuck_threshold(m))


def slud_lower_bound(n: int, p: float, k: int) -> tuple[float, bool]:
    """Gaussian upper tail ``Q((k - np) / sqrt(np(1-p)))`` and whether Slud's
    inequality guarantees it lower-bounds ``P(Binomial(n, p) >= k)``.

    Valid when ``p <= 1/4`` and ``np <= k <= n``, or ``p <= 1/2`` and
    ``np <= k <= n(1-p)``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    z = (k - n * p) / math.sqrt(n * p * (1.0 - p))
    bound = float(norm.sf(z))
    valid = (p <= 0.25 and n * p <= k <= n) or (p <= 0.5 and n * p <= k <= n * (1.0 - p))
    return bound, bool(valid)


def gaussian_tail_bound(m: int, mu: float) -> tuple[float, bool]:
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 < mu <= 0.5:
        raise ValueError(f"mu must lie in (0, 1/2], got {mu}")
    return slud_lower_bound(m, mu, stuck_threshold(m))


@dataclass(frozen=True)
class StuckProbability:
    m: int
    mu: float
    exact: float
    mc_estimate: float
    mc_stderr: float
    gaussian_bound: float
    bound_valid: bool
    trials: int = 0
    absorbed: bool = True  # every trial that reached R stayed there
    late_r_fraction: float = 0.0  # trials that started at L but ended at R


def _binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _theta_path(policies) -> list[Branch]:
    return [p.theta for p in policies]


def simulate_rc_trial(m: int, mu: float, rng: RandomSource,
                      iterations: int = ABSORPTION_ITERATIONS) -> list[Branch]:
    """HC initialisation with ``m`` demos, majority vote, then ``iterations``
    DAgger rounds of one rollout each; returns ``theta_0 .. theta_K``."""
    env = DagEnv(mu)
    cfg = RcConfig(MajorityVoteLearner(), m_initial=m, iterations=iterations)
    return _run_rc(env, DagSupervisor(), cfg, rng)


def _run_rc(env, sup, cfg, rng) -> list[Branch]:
    return _theta_path(rc_dagger(env, sup, cfg, env.horizon, rng).policies)


def rc_stuck_probability_mc(m: int, mu: float, trials: int, rng: RandomSource,
                            iterations: int = ABSORPTION_ITERATIONS):
    """Fraction of full HC-init + DAgger runs whose learner is at ``R`` after
    initialisation, with the binomial standard error.

    Returns ``(estimate, stderr, absorbed, late_r_fraction)``. ``absorbed``
    confirms that no run ever left ``R`` once there. A run that starts at
    ``L`` can still drift to ``R`` later (rare right-branch rollouts tip the
    count); ``late_r_fraction`` reports how often that happened within
    ``iterations`` rounds.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stuck = late = 0
    absorbed = True
    env, sup = DagEnv(mu), DagSupervisor()
    cfg = RcConfig(MajorityVoteLearner(), m_initial=m, iterations=iterations)
    for i in range(trials):
        path = _run_rc(env, sup, cfg, rng.child(i))
        if path[0] == Branch.R:
            stuck += 1
        elif path[-1] == Branch.R:
            late += 1
        if Branch.R in path:
            first = path.index(Branch.R)
            absorbed &= all(t == Branch.R for t in path[first:])
    est = stuck / trials
    return est, _binomial_stderr(est, trials), absorbed, late / trials


def stuck_probability(m: int, mu: float, trials: int, rng: RandomSource) -> StuckProbability:
    exact = rc_stuck_probability_exact(m, mu)
    if mu > 0:
        bound, valid = gaussian_tail_bound(m, mu)
    else:
        bound, valid = 0.0, False
    est, se, absorbed, late = rc_stuck_probability_mc(m, mu, trials, rng)
    return StuckProbability(m, mu, exact, est, se, bound, valid, trials, absorbed, late)


def hc_convergence_curve(mu: float, n_values, trials: int, rng: RandomSource) -> dict[int, float]:
    """Estimated ``P(theta_HC = L)`` for each demo count in ``n_values``.

    Each trial draws ``max(n_values)`` supervisor demos once and fits the
    majority vote on every prefix, so the curve is coupled across ``n``.
    """
    n_values = sorted({int(n) for n in n_values})
    if not n_values or n_values[0] < 1:
        raise ValueError("n_values must be a nonempty list of positive counts")
    env = DagEnv(mu)
    sup = DagSupervisor()
    hits = dict.fromkeys(n_values, 0)
    for i in range(trials):
        data, _ = hc_collect(env, sup, n_values[-1], env.horizon, rng.child(i))
        for n in n_values:
            if fit_majority_vote(data.trajectory_slice(0, n)).theta == Branch.L:
                hits[n] += 1
    return {n: hits[n] / trials for n in n_values}


def theorem_table(m_values, mu: float, trials: int, rng: RandomSource) -> list[StuckProbability]:
    return [stuck_probability(m, mu, trials, rng.child(m)) for m in m_values]


THEOREM_CSV_HEADER = "m,mu,exact,mc,stderr,bound,bound_valid"


def theorem_csv(rows) -> str:
    lines = [THEOREM_CSV_HEADER]
    for r in rows:
        lines.append(f"{r.m},{r.mu!r},{r.exact!r},{r.mc_estimate!r},{r.mc_stderr!r},"
                     f"{r.gaussian_bound!r},{str(r.bound_valid).lower()}")
    return "\n".join(lines) + "\n"
