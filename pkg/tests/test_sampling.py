import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import binom_band, open_world
from lfdbench.core import RandomSource
from lfdbench.envs import NODE_L, NODE_LL, NODE_R, NODE_RR, ROOT, Branch, DagEnv, PointMassEnv, gridworld_generate
from lfdbench.learners import LeastSquaresLearner, MajorityVoteLearner, TreeLearner, ConstantPolicy
from lfdbench.sampling import (
    HcConfig,
    RcConfig,
    data_equalized_schedule,
    hc_collect,
    hc_train,
    rc_dagger,
    robot_rollout,
)
from lfdbench.supervisors import DagSupervisor, GridSupervisor, NoisySupervisor, SwitchingLqrSupervisor

L, R = Branch.L, Branch.R


def test_configs_validate():
    with pytest.raises(ValueError):
        HcConfig(0, TreeLearner())
    with pytest.raises(ValueError):
        RcConfig(TreeLearner(), beta=1.5)
    with pytest.raises(ValueError):
        RcConfig(TreeLearner(), iterations=2, rollouts_per_iteration=(1,))
    with pytest.raises(ValueError):
        RcConfig(TreeLearner(), iterations=1, rollouts_per_iteration=0)
    assert RcConfig(TreeLearner(), iterations=3, rollouts_per_iteration=2).schedule() == (2, 2, 2)


# --- HC -----------------------------------------------------------------


def test_hc_dag_one_demo_distribution():
    env, sup, n = DagEnv(0.25), DagSupervisor(), 20_000
    right = 0
    for i in range(n):
        data, _ = hc_collect(env, sup, 1, 2, RandomSource(i))
        pairs = data.items
        assert pairs in ([(ROOT, L), (NODE_L, L), (NODE_LL, L)], [(ROOT, L), (NODE_R, R), (NODE_RR, R)])
        right += pairs[1][0] == NODE_R
    assert abs(right / n - 0.25) <= binom_band(0.25, n)


def test_hc_grid_labels_match_supervisor(rng):
    w = gridworld_generate(rng, 8, 8, slip_prob=0.0)
    sup = GridSupervisor(w)
    data, trajs = hc_collect(w, sup, 1, 30, rng)
    assert all(u == sup(s) for s, u in data)
    assert trajs[0].controls == tuple(data.labels)


def test_hc_dataset_size(rng):
    data, trajs = hc_collect(open_world(), GridSupervisor(open_world()), 3, 30, rng)
    assert len(data) == 3 * 31 and data.n_trajectories == 3 and len(trajs) == 3
    with pytest.raises(ValueError):
        hc_collect(open_world(), GridSupervisor(open_world()), 0, 30, rng)


def test_hc_noisy_demonstrator_executes_its_label(rng):
    w = open_world(6, 6, goal=(5, 5), slip=0.0)
    sup = NoisySupervisor(GridSupervisor(w), 0.5)
    _, trajs = hc_collect(w, sup, 5, 30, rng)
    for t in trajs:
        for (s, u), s2 in zip(t.pairs, t.states[1:]):
            assert s2 == w.step(s, u, rng)  # slip 0: next cell follows the recorded label


def test_hc_train_examples(rng):
    env = DagEnv(0.25)
    from conftest import make_dataset
    assert hc_train(make_dataset([0, 1, 3], [L, L, L]), MajorityVoteLearner()).theta == L
    w = gridworld_generate(rng, 15, 15)
    sup = GridSupervisor(w)
    cells = w.cells()
    pol = hc_train(make_dataset(cells, [sup(c) for c in cells]), TreeLearner())
    assert all(pol(c) == sup(c) for c in cells)
    with pytest.raises(ValueError):
        hc_train(make_dataset([], []), TreeLearner())


def test_hc_pointmass_region1_recovers_k1(rng):
    env = PointMassEnv(noise_scale=0.1, start=(-15.0, -10.0, 0.0, 0.0))
    sup = SwitchingLqrSupervisor(env)
    data, _ = hc_collect(env, sup, 5, 35, rng)
    assert not any(env.in_region2(s) for s in data.states)
    pol = hc_train(data, LeastSquaresLearner(ridge=1e-10))
    np.testing.assert_allclose(pol.M, -sup.gains[0].K, atol=1e-4)


def test_label_noise_only_for_continuous(rng):
    w = open_world()
    with pytest.raises(TypeError):
        hc_collect(w, GridSupervisor(w), 1, 5, rng, label_noise=1.0)


# --- RC -----------------------------------------------------------------


def test_rc_k0_equals_hc():
    w = gridworld_generate(RandomSource(1), 10, 10)
    sup = GridSupervisor(w)
    cfg = RcConfig(TreeLearner(), m_initial=3, iterations=0)
    res = rc_dagger(w, sup, cfg, 30, RandomSource(5))
    data, _ = hc_collect(w, sup, 3, 30, RandomSource(5))
    assert res.dataset.states == data.states and res.dataset.labels == data.labels
    pol = hc_train(data, TreeLearner())
    assert res.policy.to_json() == pol.to_json()
    assert len(res.policies) == 1


def test_rc_dag_r_is_absorbing(rng):
    env, sup = DagEnv(0.25), DagSupervisor()
    from conftest import make_dataset
    start = make_dataset([ROOT, NODE_R, NODE_RR], [L, R, R])
    res = rc_dagger(env, sup, RcConfig(MajorityVoteLearner(), iterations=10), 2, rng, initial=start)
    assert all(p.theta == R for p in res.policies)
    for k in range(1, 11):
        chunk = res.dataset.trajectory_slice(k, k + 1)
        assert chunk.items == [(ROOT, L), (NODE_R, R), (NODE_RR, R)]
    n_r = [res.dataset.trajectory_slice(0, k + 1).labels.count(R) for k in range(11)]
    n_l = [res.dataset.trajectory_slice(0, k + 1).labels.count(L) for k in range(11)]
    assert all(np.diff(np.array(n_r) - np.array(n_l)) > 0)


def test_rc_beta_one_is_hc_sampling():
    w = gridworld_generate(RandomSource(2), 8, 8)
    sup = GridSupervisor(w)
    # a learner that never agrees with the supervisor: executed controls still come from it
    res = rc_dagger(w, sup, RcConfig(TreeLearner(max_depth=0), iterations=4, beta=1.0), 30,
                    RandomSource(3))
    for t in res.trajectories:
        assert all(u == sup(s) for s, u in t.pairs)


def test_rc_labels_are_supervisor_not_executed(rng):
    w = gridworld_generate(RandomSource(7), 8, 8)
    sup = GridSupervisor(w)
    res = rc_dagger(w, sup, RcConfig(TreeLearner(max_depth=1), iterations=5), 30, rng)
    assert all(u == sup(s) for s, u in res.dataset)
    executed_differs = any(u != sup(s) for t in res.trajectories for s, u in t.pairs)
    assert executed_differs


def test_rc_continuous_label_noise(rng):
    env = PointMassEnv()
    sup = SwitchingLqrSupervisor(env)
    res = rc_dagger(env, sup, RcConfig(LeastSquaresLearner(), iterations=3, label_noise=2.0),
                    35, rng)
    resid = np.array([u - sup(s) for s, u in res.dataset])
    assert abs(resid.std() - 2.0) < 0.25
    assert abs(resid.mean()) < 0.3


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), k=st.integers(0, 5), per=st.integers(1, 3),
       m=st.integers(1, 3))
def test_rc_dataset_monotone(seed, k, per, m):
    env, sup = DagEnv(0.25), DagSupervisor()
    cfg = RcConfig(MajorityVoteLearner(), m_initial=m, iterations=k, rollouts_per_iteration=per)
    res = rc_dagger(env, sup, cfg, 2, RandomSource(seed))
    assert res.sizes == [m * 3 + i * per * 3 for i in range(k + 1)]
    assert res.n_demos == m + k * per
    tags = res.dataset.provenance
    assert tags[: 3 * m] == ["initial-demo"] * 3 * m
    assert all(t.startswith("rc-iteration-") for t in tags[3 * m:])
    # the RC path: theta once R stays R
    path = [p.theta for p in res.policies]
    if R in path:
        assert all(t == R for t in path[path.index(R):])


def test_rc_preloaded_requires_data(rng):
    from lfdbench.core import Dataset
    with pytest.raises(ValueError):
        rc_dagger(DagEnv(), DagSupervisor(), RcConfig(MajorityVoteLearner()), 2, rng,
                  initial=Dataset())
    with pytest.raises(ValueError):
        rc_dagger(DagEnv(), DagSupervisor(), RcConfig(MajorityVoteLearner(), m_initial=0), 2, rng)


def test_robot_rollout_records_executed_controls(rng):
    traj, labels = robot_rollout(DagEnv(), ConstantPolicy(R), DagSupervisor(), 2, rng)
    assert traj.states == (ROOT, NODE_R, NODE_RR)
    assert traj.controls == (R, R, R)
    assert labels == [L, R, R]


# --- schedule -----------------------------------------------------------


def test_schedule_examples():
    assert data_equalized_schedule(60, RcConfig(TreeLearner(), m_initial=20, iterations=2)) == [20, 20]
    assert data_equalized_schedule(10, RcConfig(TreeLearner(), m_initial=1, iterations=3)) == [3, 3, 3]
    assert data_equalized_schedule(5, RcConfig(TreeLearner(), m_initial=5, iterations=3)) == []
    assert data_equalized_schedule(12, RcConfig(TreeLearner(), m_initial=1, iterations=3)) == [3, 3, 5]
    with pytest.raises(ValueError):
        data_equalized_schedule(4, RcConfig(TreeLearner(), m_initial=5, iterations=1))
    with pytest.raises(ValueError):
        data_equalized_schedule(3, RcConfig(TreeLearner(), m_initial=1, iterations=5))


@given(total=st.integers(1, 500), m=st.integers(1, 50), k=st.integers(1, 20))
def test_schedule_spends_budget(total, m, k):
    cfg = RcConfig(TreeLearner(), m_initial=m, iterations=k)
    if total < m or (total > m and total - m < k):
        with pytest.raises(ValueError):
            data_equalized_schedule(total, cfg)
        return
    counts = data_equalized_schedule(total, cfg)
    assert m + sum(counts) == total
    if counts:
        assert len(counts) == k and max(counts[:-1] or [counts[-1]]) <= counts[-1]
        assert len(set(counts[:-1])) <= 1
