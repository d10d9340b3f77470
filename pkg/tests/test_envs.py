import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import binom_band, open_world
from lfdbench.core import RandomSource
from lfdbench.envs import (
    ACTIONS,
    MOVES,
    NODE_L,
    NODE_LL,
    NODE_LR,
    NODE_R,
    ROOT,
    Action,
    Branch,
    DagEnv,
    DivergenceError,
    GridWorld,
    PointMassEnv,
    dag_step,
    gridworld_generate,
    gridworld_reward,
    gridworld_step,
    pointmass_step,
)

# --- grid world ---------------------------------------------------------


def test_generate_default_counts(rng):
    w = gridworld_generate(rng)
    assert (w.width, w.height) == (15, 15)
    assert len(w.penalties) == 18
    assert w.goal not in w.penalties
    assert len(w.free_cells) == 206


def test_generate_tiny(rng):
    w = gridworld_generate(rng, 2, 1, 0.0)
    assert not w.penalties
    assert w.goal in {(0, 0), (1, 0)}


def test_generate_deterministic():
    a = gridworld_generate(RandomSource(5))
    b = gridworld_generate(RandomSource(5))
    assert a.to_json() == b.to_json()


def test_generate_rejects_bad_fraction(rng):
    with pytest.raises(ValueError):
        gridworld_generate(rng, 2, 1, 1.0)
    with pytest.raises(ValueError):
        gridworld_generate(rng, 1, 1, 0.0)
    # 0.6 * 2 cells floors to 1 penalty, leaving exactly one goal cell
    assert len(gridworld_generate(rng, 2, 1, 0.6).penalties) == 1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32), w=st.integers(2, 20), h=st.integers(1, 20),
       frac=st.floats(0.0, 0.5))
def test_generate_penalty_count(seed, w, h, frac):
    world = gridworld_generate(RandomSource(seed), w, h, frac)
    assert len(world.penalties) == int(np.floor(frac * w * h))
    assert world.goal not in world.penalties


def test_step_examples(rng):
    w = open_world(slip=0.0)
    assert gridworld_step(w, (3, 3), Action.FORWARD, rng) == (3, 4)
    assert gridworld_step(w, (0, 0), Action.LEFT, rng) == (0, 0)
    with pytest.raises(ValueError):
        gridworld_step(w, (5, 0), Action.STAY, rng)


def test_slip_frequency():
    w = open_world(15, 15, goal=(0, 0), slip=0.16)
    rng = RandomSource(99)
    n = 100_000
    moved = sum(gridworld_step(w, (7, 7), Action.STAY, rng) != (7, 7) for _ in range(n))
    assert abs(moved / n - 0.16) <= 0.004


def test_slip_outcomes_uniform_over_other_moves():
    w = open_world(15, 15, goal=(0, 0), slip=1.0)
    rng = RandomSource(3)
    n = 40_000
    counts = {}
    for _ in range(n):
        c = gridworld_step(w, (7, 7), Action.RIGHT, rng)
        counts[c] = counts.get(c, 0) + 1
    assert (8, 7) not in counts
    assert len(counts) == 4
    for c in counts.values():
        assert abs(c / n - 0.25) <= binom_band(0.25, n)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), col=st.integers(0, 4), row=st.integers(0, 4),
       a=st.sampled_from(ACTIONS), slip=st.floats(0, 1))
def test_step_stays_in_neighbourhood(seed, col, row, a, slip):
    w = open_world(slip=slip)
    out = gridworld_step(w, (col, row), a, RandomSource(seed))
    assert w.in_bounds(out)
    assert abs(out[0] - col) + abs(out[1] - row) <= 1


@given(col=st.integers(0, 4), row=st.integers(0, 4), a=st.sampled_from(ACTIONS))
def test_step_without_slip_is_intended_move(col, row, a):
    w = open_world(slip=0.0)
    dc, dr = MOVES[a]
    want = (col + dc, row + dr)
    want = want if w.in_bounds(want) else (col, row)
    assert gridworld_step(w, (col, row), a, RandomSource(0)) == want


def test_transition_matrices_match_step_model():
    w = open_world(3, 2, goal=(2, 1), slip=0.2)
    mats = w.transition_matrices()
    for a, m in zip(ACTIONS, mats):
        dense = m.toarray()
        np.testing.assert_allclose(dense.sum(axis=1), 1.0)
        for i in range(w.n_cells):
            # brute-force enumeration of the slip model
            expect = np.zeros(w.n_cells)
            for b in ACTIONS:
                p = 0.8 if b == a else 0.2 / 4
                c, r = w.cell(i)
                dc, dr = MOVES[b]
                nxt = (c + dc, r + dr) if w.in_bounds((c + dc, r + dr)) else (c, r)
                expect[w.index(nxt)] += p
            np.testing.assert_allclose(dense[i], expect, atol=1e-15)


def test_rewards():
    w = open_world(goal=(4, 4), penalties=[(1, 1)])
    assert gridworld_reward(w, (4, 4)) == 10.0
    assert gridworld_reward(w, (1, 1)) == -10.0
    assert gridworld_reward(w, (2, 2)) == 0.0


def test_world_validation():
    with pytest.raises(ValueError):
        GridWorld(3, 3, goal=(1, 1), penalties=frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        GridWorld(3, 3, goal=(3, 1), penalties=frozenset())
    with pytest.raises(ValueError):
        GridWorld(3, 3, goal=(1, 1), penalties=frozenset(), slip_prob=1.5)


def test_world_json_roundtrip(rng):
    w = gridworld_generate(rng)
    doc = json.loads(json.dumps(w.to_json()))
    assert set(doc) == {"width", "height", "goal", "penalties", "slip_prob"}
    w2 = GridWorld.from_json(doc)
    assert w2.to_json() == w.to_json()
    np.testing.assert_array_equal(w2.rewards, w.rewards)


def test_start_state_is_free(rng):
    w = gridworld_generate(rng, 4, 4, 0.25)
    for i in range(200):
        s = w.initial_state(rng)
        assert s != w.goal and s not in w.penalties


# --- point mass ---------------------------------------------------------


def test_pointmass_matrices():
    env = PointMassEnv()
    np.testing.assert_array_equal(env.A, [[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]])
    np.testing.assert_array_equal(env.B1[:2], 0)
    np.testing.assert_array_equal(env.B1[2:], np.eye(2))
    np.testing.assert_array_equal(env.B2[2:], np.eye(2) / 4)


def test_pointmass_step_examples(rng):
    env = PointMassEnv(noise_scale=0.0)
    np.testing.assert_array_equal(pointmass_step(env, [13, 13, 0, 0], [4, 0], rng), [13, 13, 1, 0])
    np.testing.assert_array_equal(pointmass_step(env, [0, 0, 0, 0], [1, 0], rng), [0, 0, 1, 0])
    np.testing.assert_array_equal(pointmass_step(env, [-15, -10, 2, 0], [0, 0], rng),
                                  [-13, -10, 2, 0])


def test_region_boundary():
    env = PointMassEnv()
    assert not env.in_region2((12, 12))
    assert not env.in_region2((12.0001, 12))
    assert env.in_region2((12.0001, 12.0001))


vec4 = st.lists(st.floats(-50, 50), min_size=4, max_size=4).map(np.array)
vec2 = st.lists(st.floats(-50, 50), min_size=2, max_size=2).map(np.array)


@given(s1=vec4, s2=vec4, u1=vec2, u2=vec2)
def test_pointmass_linear_within_region(s1, s2, u1, u2):
    env = PointMassEnv(noise_scale=0.0)
    s1[:2] = -np.abs(s1[:2]) - 1  # keep all three states in region 1
    s2[:2] = -np.abs(s2[:2]) - 1
    rng = RandomSource(0)
    lhs = pointmass_step(env, s1 + s2, u1 + u2, rng)
    rhs = (pointmass_step(env, s1, u1, rng) + pointmass_step(env, s2, u2, rng)
           - pointmass_step(env, np.zeros(4), np.zeros(2), rng))
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_pointmass_noise_variance():
    env = PointMassEnv(noise_scale=0.1)
    rng = RandomSource(1)
    draws = np.array([pointmass_step(env, np.zeros(4), np.zeros(2), rng) for _ in range(20_000)])
    np.testing.assert_allclose(draws.var(axis=0), 0.1, rtol=0.05)
    np.testing.assert_allclose(draws.mean(axis=0), 0.0, atol=0.01)


def test_pointmass_divergence(rng):
    env = PointMassEnv(noise_scale=0.0)
    with pytest.raises(DivergenceError):
        pointmass_step(env, [1e308, 0, 1e308, 0], [0, 0], rng)


# --- DAG ----------------------------------------------------------------


def test_dag_examples(rng):
    env = DagEnv(0.25)
    assert all(dag_step(env, ROOT, Branch.R, rng) == NODE_R for _ in range(100))
    assert dag_step(env, NODE_L, Branch.L, rng) == NODE_LL
    assert dag_step(env, NODE_L, Branch.R, rng) == NODE_LR
    with pytest.raises(ValueError):
        dag_step(env, NODE_LL, Branch.L, rng)


@pytest.mark.parametrize("mu", [0.25, 0.1])
def test_dag_root_frequency(mu):
    env = DagEnv(mu)
    rng = RandomSource(11)
    n = 100_000
    right = sum(dag_step(env, ROOT, Branch.L, rng) == NODE_R for _ in range(n))
    assert abs(right / n - mu) <= binom_band(mu, n)


def test_dag_mu_range():
    with pytest.raises(ValueError):
        DagEnv(0.3)
    with pytest.raises(ValueError):
        DagEnv(-0.1)
    DagEnv(0.0)
