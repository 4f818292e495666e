import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfgbench.core import Distribution, MeanFieldFlow, QFunction, StationaryPolicy, TimePolicy
from mfgbench.envs import random_tabular_model, tabular_model
from mfgbench.mdp import (
    ARGMAX,
    PolicyExtraction,
    backward_induction_optimal,
    backward_induction_policy,
    bellman_backup_optimal,
    bellman_backup_policy,
    extract_policy,
    initial_value,
    policy_evaluation,
    policy_iteration,
    state_value,
    value_iteration,
)
from oracles import enumerated_q0, naive_backup

seeds = st.integers(0, 2**31)


def one_state(reward, gamma, horizon=None):
    return tabular_model(np.ones((1, 1, 1)), np.full((1, 1), reward), [1.0],
                         horizon=horizon, discount=gamma)


def random_q(rng, model):
    return QFunction(rng.normal(scale=5, size=(model.n_states, model.n_actions)))


def test_backup_trivial_examples():
    mu = Distribution([1.0])
    model = one_state(1.0, 0.5)
    q = QFunction([[2.0]])
    assert bellman_backup_policy(q, StationaryPolicy([[1.0]]), mu, model).table[0, 0] == 2.0
    assert bellman_backup_optimal(q, mu, model).table[0, 0] == 2.0
    zero = one_state(0.0, 0.5)
    assert bellman_backup_optimal(QFunction([[0.0]]), mu, zero).table[0, 0] == 0.0


@given(seeds)
def test_backups_match_naive_loops(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 3, 2, crowd=0.7)
    mu = Distribution(rng.dirichlet(np.ones(3)))
    q = random_q(rng, model)
    pi = StationaryPolicy(rng.dirichlet(np.ones(2), size=3))
    assert np.allclose(bellman_backup_optimal(q, mu, model).table, naive_backup(model, q.table, mu), atol=1e-12)
    assert np.allclose(bellman_backup_policy(q, pi, mu, model).table,
                       naive_backup(model, q.table, mu, pi.table), atol=1e-12)


def test_optimal_backup_on_deterministic_chain():
    # 0 -> 1 -> 1, action 1 at state 0 stays put; hand-computed values
    P = np.zeros((2, 2, 2))
    P[0, 0, 1] = P[0, 1, 0] = P[1, 0, 1] = P[1, 1, 1] = 1.0
    R = np.array([[1.0, 0.0], [2.0, 3.0]])
    model = tabular_model(P, R, [1.0, 0.0], discount=0.5)
    q = QFunction([[4.0, -1.0], [0.0, 10.0]])
    out = bellman_backup_optimal(q, Distribution([1.0, 0.0]), model).table
    assert np.allclose(out, [[1 + 0.5 * 10, 0 + 0.5 * 4], [2 + 5, 3 + 5]])


@given(seeds, st.booleans())
def test_bellman_contraction(seed, policy_operator):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 5, 3, discount=0.9, crowd=1.0)
    mu = Distribution(rng.dirichlet(np.ones(5)))
    q1, q2 = random_q(rng, model), random_q(rng, model)
    if policy_operator:
        pi = StationaryPolicy(rng.dirichlet(np.ones(3), size=5))
        b1, b2 = bellman_backup_policy(q1, pi, mu, model), bellman_backup_policy(q2, pi, mu, model)
    else:
        b1, b2 = bellman_backup_optimal(q1, mu, model), bellman_backup_optimal(q2, mu, model)
    lhs = np.abs(b1.table - b2.table).max()
    assert lhs <= 0.9 * np.abs(q1.table - q2.table).max() + 1e-12


@given(seeds)
def test_optimal_backup_monotone(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 4, 3)
    mu = Distribution(rng.dirichlet(np.ones(4)))
    q1 = random_q(rng, model)
    q2 = QFunction(q1.table + np.abs(rng.normal(size=q1.table.shape)))
    assert np.all(bellman_backup_optimal(q1, mu, model).table <= bellman_backup_optimal(q2, mu, model).table + 1e-12)


def test_discount_one_rejected():
    with pytest.raises(ValueError):
        one_state(1.0, 1.0)


def test_value_iteration_examples():
    mu = Distribution([1.0])
    q, info = value_iteration(mu, one_state(1.0, 0.5))
    assert info.converged and q.table[0, 0] == pytest.approx(2.0, abs=1e-9)
    q, _ = value_iteration(mu, one_state(0.0, 0.5))
    assert q.table[0, 0] == 0.0
    q, info = value_iteration(mu, one_state(1.0, 0.99), max_iter=5)
    assert not info.converged and info.iterations == 5


@given(seeds)
def test_value_iteration_agrees_with_policy_iteration(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 4, 3)
    mu = Distribution(rng.dirichlet(np.ones(4)))
    tol = 1e-10
    q_vi, _ = value_iteration(mu, model, tol=tol)
    pi, info = policy_iteration(mu, model)
    assert info.converged
    q_pi, _ = policy_evaluation(pi, mu, model, tol=tol)
    assert np.allclose(q_vi.table, q_pi.table, atol=2 * tol / (1 - model.discount) + 1e-9)
    # the returned policy is greedy for its own Q
    greedy = extract_policy(q_pi).table
    assert np.all(greedy[pi.table > 0] > 0)


@given(seeds)
def test_policy_evaluation_matches_linear_solve(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 4, 3, crowd=0.5)
    mu = Distribution(rng.dirichlet(np.ones(4)))
    pi = StationaryPolicy(rng.dirichlet(np.ones(3), size=4))
    q, info = policy_evaluation(pi, mu, model)
    P = model.transition_matrix(0, mu).reshape(12, 4)
    R = model.reward_matrix(0, mu).ravel()
    # Q = R + gamma P Pi Q with Pi mapping next state to state-action pairs
    Pi = np.zeros((4, 12))
    for y in range(4):
        Pi[y, 3 * y:3 * y + 3] = pi.table[y]
    exact = np.linalg.solve(np.eye(12) - model.discount * P @ Pi, R)
    assert info.converged and np.allclose(q.table.ravel(), exact, atol=1e-8)


def test_policy_evaluation_trivial():
    mu = Distribution([1.0])
    q, _ = policy_evaluation(StationaryPolicy([[1.0]]), mu, one_state(1.0, 0.9))
    assert q.table[0, 0] == pytest.approx(10.0, abs=1e-8)
    model = tabular_model(np.full((3, 2, 3), 1 / 3), np.zeros((3, 2)), np.full(3, 1 / 3))
    q, _ = policy_evaluation(StationaryPolicy.uniform(3, 2), Distribution.uniform(3), model)
    assert np.all(q.table == 0)


def test_policy_iteration_ties_and_single_action():
    one = tabular_model(np.full((2, 1, 2), 0.5), np.array([[1.0], [0.0]]), [0.5, 0.5])
    pi, _ = policy_iteration(Distribution([0.5, 0.5]), one)
    assert np.all(pi.table == 1.0)
    flat = tabular_model(np.ones((1, 3, 1)), np.full((1, 3), 2.0), [1.0])
    pi, _ = policy_iteration(Distribution([1.0]), flat)
    assert np.allclose(pi.table, 1 / 3)


def test_extract_policy_examples():
    assert np.array_equal(extract_policy(QFunction([[1.0, 2.0]])).table, [[0.0, 1.0]])
    soft = PolicyExtraction("softmax", 3.7)
    assert np.allclose(extract_policy(QFunction([[0.0, 0.0]]), soft).table, 0.5)
    e = np.e
    assert np.allclose(extract_policy(QFunction([[1.0, 0.0]]), PolicyExtraction("softmax", 1.0)).table,
                       [[e / (e + 1), 1 / (e + 1)]])
    assert np.allclose(extract_policy(QFunction([[1.0, 1.0 + 1e-10, 0.0]])).table, [[0.5, 0.5, 0.0]])
    with pytest.raises(ValueError):
        PolicyExtraction("softmax", 0.0)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=6), st.floats(1e-3, 1e3))
def test_softmax_rows_positive_and_normalized(row, tau):
    pi = extract_policy(QFunction([row]), PolicyExtraction("softmax", tau)).table
    assert abs(pi.sum() - 1.0) <= 1e-12
    # strictly positive whenever the logits do not underflow
    if tau * (max(row) - min(row)) < 700:
        assert np.all(pi > 0)


@given(seeds)
def test_large_temperature_approaches_argmax(seed):
    rng = np.random.default_rng(seed)
    base = rng.permutation(4) * 0.1 + rng.normal(size=(1, 1))  # gaps >= 0.1
    q = QFunction(base.reshape(1, 4))
    soft = extract_policy(q, PolicyExtraction("softmax", 1e3)).table
    hard = extract_policy(q).table
    assert 0.5 * np.abs(soft - hard).sum() < 1e-6


@given(seeds)
def test_state_value_matches_loop(seed):
    rng = np.random.default_rng(seed)
    q = QFunction(rng.normal(size=(3, 4)))
    pi = StationaryPolicy(rng.dirichlet(np.ones(4), size=3))
    loop = [sum(pi.table[x, a] * q.table[x, a] for a in range(4)) for x in range(3)]
    assert np.allclose(state_value(q, pi), loop)
    assert np.allclose(state_value(q, StationaryPolicy.deterministic([1, 2, 0], 4)), q.table[[0, 1, 2], [1, 2, 0]])
    assert state_value(QFunction([[0.0, 2.0]]), StationaryPolicy.uniform(1, 2))[0] == 1.0


def test_backward_induction_horizon_zero():
    R = np.array([[1.0, 2.0], [3.0, -1.0]])
    model = tabular_model(np.full((2, 2, 2), 0.5), R, [0.5, 0.5], horizon=0)
    q, pi = backward_induction_optimal(MeanFieldFlow([[0.5, 0.5]]), model)
    assert np.array_equal(q.tables[0], R)
    assert np.array_equal(pi.tables[0], [[0, 1], [1, 0]])


def test_backward_induction_two_steps_by_hand():
    # deterministic: action 0 stays, action 1 switches; time-varying rewards
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[0, 1, 1] = P[1, 0, 1] = P[1, 1, 0] = 1.0
    R = np.array([[[0.0, 1.0], [2.0, 0.0]], [[5.0, 5.0], [1.0, 1.0]]])
    model = tabular_model(P, R, [1.0, 0.0], horizon=1)
    q, _ = backward_induction_optimal(MeanFieldFlow([[1, 0], [1, 0]]), model)
    assert np.array_equal(q.tables[1], R[1])
    assert np.array_equal(q.tables[0], [[0 + 5, 1 + 1], [2 + 1, 0 + 5]])


@pytest.mark.parametrize("seed", range(5))
def test_backward_induction_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 3, 2, horizon=3, time_varying=True, crowd=1.0)
    flow = rng.dirichlet(np.ones(3), size=4)
    q, pi = backward_induction_optimal(MeanFieldFlow(flow), model)
    assert np.allclose(q.tables[0], enumerated_q0(model, flow), atol=1e-9)
    # the greedy policy attains the optimum
    q_pi = backward_induction_policy(MeanFieldFlow(flow), pi, model)
    assert np.allclose(q_pi.tables, q.tables, atol=1e-9)


@given(seeds)
def test_optimal_dominates_any_policy(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 4, 3, horizon=5, crowd=0.5)
    flow = MeanFieldFlow(rng.dirichlet(np.ones(4), size=6))
    q_star, _ = backward_induction_optimal(flow, model)
    pi = TimePolicy(rng.dirichlet(np.ones(3), size=(6, 4)))
    q_pi = backward_induction_policy(flow, pi, model)
    assert np.all(q_star.tables >= q_pi.tables - 1e-9)


def test_policy_q_zero_on_reward_free_model():
    model = tabular_model(np.full((3, 2, 3), 1 / 3), np.zeros((3, 2)), np.full(3, 1 / 3), horizon=4)
    q = backward_induction_policy(MeanFieldFlow(np.full((5, 3), 1 / 3)), TimePolicy.uniform(4, 3, 2), model)
    assert np.all(q.tables == 0)


def test_policy_value_matches_monte_carlo():
    rng = np.random.default_rng(3)
    model = random_tabular_model(rng, 3, 2, horizon=4, crowd=0.5)
    flow = rng.dirichlet(np.ones(3), size=5)
    tables = rng.dirichlet(np.ones(2), size=(5, 3))
    q = backward_induction_policy(MeanFieldFlow(flow), TimePolicy(tables), model).tables
    m0 = np.asarray(model.initial_distribution)
    exact = initial_value(q[0], tables[0], m0)

    episodes = 100_000
    P = [model.transition_matrix(n, flow[n]) for n in range(4)]
    R = [model.reward_matrix(n, flow[n]) for n in range(5)]
    x = rng.choice(3, size=episodes, p=m0)
    total = np.zeros(episodes)
    for n in range(5):
        cum_a = tables[n][x].cumsum(axis=1)
        a = (rng.random(episodes)[:, None] > cum_a).sum(axis=1)
        total += R[n][x, a]
        if n < 4:
            cum_y = P[n][x, a].cumsum(axis=1)
            x = np.minimum((rng.random(episodes)[:, None] > cum_y).sum(axis=1), 2)
    se = total.std(ddof=1) / np.sqrt(episodes)
    assert abs(total.mean() - exact) <= 3 * se
