import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from mfgbench.core import Distribution, StationaryPolicy, TimePolicy
from mfgbench.envs import random_tabular_model, tabular_model
from mfgbench.meanfield import (
    discounted_distribution,
    evolutive_flow,
    push_forward,
    stationary_distribution,
)
from mfgbench.metrics import entropy
from oracles import naive_push

seeds = st.integers(0, 2**31)


def identity_model(S=3, A=2, horizon=None):
    P = np.zeros((S, A, S))
    for x in range(S):
        P[x, :, x] = 1.0
    return tabular_model(P, np.zeros((S, A)), np.full(S, 1 / S), horizon=horizon)


def ring_model():
    P = np.zeros((3, 1, 3))
    for x in range(3):
        P[x, 0, (x + 1) % 3] = 1.0
    return tabular_model(P, np.zeros((3, 1)), [1.0, 0, 0], horizon=3)


def test_push_forward_examples():
    mu = Distribution([0.2, 0.3, 0.5])
    model = identity_model()
    pi = StationaryPolicy.uniform(3, 2)
    assert np.allclose(push_forward(mu, pi, mu, 0, model).weights, mu.weights)
    ring = ring_model()
    out = push_forward(mu, StationaryPolicy.uniform(3, 1), mu, 0, ring)
    assert np.allclose(out.weights, [0.5, 0.2, 0.3])


def crowd_dependent(rng):
    base = rng.dirichlet(np.ones(4), size=(4, 2))

    def transitions(n, mu):
        # mixing toward the least crowded state, mu-dependent
        target = np.zeros(4)
        target[np.argmin(mu)] = 1.0
        return 0.7 * base + 0.3 * target

    return tabular_model(transitions, rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4)), horizon=3)


@given(seeds)
def test_push_forward_matches_triple_loop(seed):
    rng = np.random.default_rng(seed)
    model = crowd_dependent(rng)
    mu = Distribution(rng.dirichlet(np.ones(4)))
    ref = Distribution(rng.dirichlet(np.ones(4)))
    pi = StationaryPolicy(rng.dirichlet(np.ones(2), size=4))
    out = push_forward(mu, pi, ref, 0, model)
    assert np.allclose(out.weights, naive_push(model, 0, mu.weights, pi.table, ref.weights), atol=1e-12)
    assert abs(out.weights.sum() - 1.0) <= 1e-9


@given(seeds, st.integers(0, 6))
def test_flow_steps_are_distributions(seed, horizon):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 5, 3, horizon=horizon, time_varying=True)
    pi = TimePolicy(rng.dirichlet(np.ones(3), size=(horizon + 1, 5)))
    flow = evolutive_flow(model.initial_distribution, pi, model)
    assert flow.horizon == horizon
    assert np.allclose(flow.steps_array[0], np.asarray(model.initial_distribution), rtol=0, atol=1e-15)
    assert np.allclose(flow.steps_array.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(flow.steps_array >= 0)


def test_flow_trivial_cases():
    model = identity_model(horizon=4)
    m0 = Distribution([0.1, 0.2, 0.7])
    flow = evolutive_flow(m0, TimePolicy.uniform(4, 3, 2), model)
    assert np.allclose(flow.steps_array, np.tile(m0.weights, (5, 1)))
    zero = identity_model(horizon=0)
    assert evolutive_flow(m0, TimePolicy.uniform(0, 3, 2), zero).steps_array.shape == (1, 3)


def test_uniform_policy_flow_stays_concentrated(four_rooms):
    pi = TimePolicy.uniform(four_rooms.horizon, four_rooms.n_states, four_rooms.n_actions)
    flow = evolutive_flow(four_rooms.initial_distribution, pi, four_rooms)
    assert entropy(flow.steps_array[-1]) < 0.9 * np.log(four_rooms.n_states)


def test_stationary_distribution_trivial_cases():
    mu, info = stationary_distribution(StationaryPolicy.uniform(3, 2), identity_model())
    assert info.converged and np.allclose(mu.weights, 1 / 3)
    rng = np.random.default_rng(0)
    # doubly stochastic: average of permutation matrices
    perms = [np.eye(4)[rng.permutation(4)] for _ in range(3)]
    P = np.stack([np.mean(perms, axis=0), perms[0]], axis=1)
    model = tabular_model(P, np.zeros((4, 2)), np.full(4, 0.25))
    mu, info = stationary_distribution(StationaryPolicy.uniform(4, 2), model)
    assert info.converged and np.allclose(mu.weights, 0.25, atol=1e-9)


def test_stationary_distribution_mu_dependent_bisection():
    # flip prob from state 0 is 0.25 + 0.5 mu(0); from state 1 it is 0.25
    def transitions(n, mu):
        q = 0.25 + 0.5 * mu[0]
        return np.array([[[1 - q, q]], [[0.25, 0.75]]])

    model = tabular_model(transitions, np.zeros((2, 1)), [0.5, 0.5])
    mu, info = stationary_distribution(StationaryPolicy.uniform(2, 1), model, tol=1e-13)
    # balance: m q(m) = (1 - m) 0.25
    m = brentq(lambda m: m * (0.25 + 0.5 * m) - (1 - m) * 0.25, 0.0, 1.0, xtol=1e-14)
    assert info.converged
    assert mu.weights[0] == pytest.approx(m, abs=1e-12)


def test_stationary_distribution_flags_truncation():
    def transitions(n, mu):
        return np.array([[[0.0, 1.0]], [[1.0, 0.0]]])

    model = tabular_model(transitions, np.zeros((2, 1)), [1.0, 0.0])
    # undamped iteration on a periodic chain started away from its fixed point
    _, info = stationary_distribution(StationaryPolicy.uniform(2, 1), model, max_iter=3, damping=1.0)
    assert info.converged  # uniform start is already the fixed point
    periodic = tabular_model(
        lambda n, mu: np.array([[[0.0, 1.0]], [[0.5, 0.5]]]) if mu[0] > 0.3 else np.array([[[1.0, 0.0]], [[1.0, 0.0]]]),
        np.zeros((2, 1)), [1.0, 0.0])
    _, info = stationary_distribution(StationaryPolicy.uniform(2, 1), periodic, max_iter=50, damping=1.0)
    assert not info.converged


@given(seeds)
def test_stationary_residual_within_tolerance(seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 5, 2)
    pi = StationaryPolicy(rng.dirichlet(np.ones(2), size=5))
    mu, info = stationary_distribution(pi, model, tol=1e-10)
    image = naive_push(model, 0, mu.weights, pi.table)
    assert info.converged and np.abs(image - mu.weights).sum() <= 1e-10 + 1e-12


def test_discounted_distribution_gamma_zero_is_m0():
    rng = np.random.default_rng(1)
    model = random_tabular_model(rng, 4, 2)
    m0 = Distribution(rng.dirichlet(np.ones(4)))
    mu, _ = discounted_distribution(m0, StationaryPolicy.uniform(4, 2), model, 0.0)
    assert np.array_equal(mu.weights, m0.weights)


def test_discounted_distribution_identity():
    m0 = Distribution([0.1, 0.6, 0.3])
    mu, _ = discounted_distribution(m0, StationaryPolicy.uniform(3, 2), identity_model(), 0.8)
    assert np.allclose(mu.weights, m0.weights, atol=1e-12)


@given(st.floats(0.05, 0.97), seeds)
def test_discounted_distribution_geometric_series(gamma, seed):
    rng = np.random.default_rng(seed)
    model = random_tabular_model(rng, 2, 2)
    pi = StationaryPolicy(rng.dirichlet(np.ones(2), size=2))
    m0 = Distribution(rng.dirichlet(np.ones(2)))
    tol = 1e-10
    mu, info = discounted_distribution(m0, pi, model, gamma, tol=tol)
    M = np.einsum("xa,xay->xy", pi.table, model.transition_matrix(0, m0))
    # (1 - gamma) sum_n gamma^n m0 M^n, summed in closed form
    exact = (1 - gamma) * np.linalg.solve((np.eye(2) - gamma * M).T, m0.weights)
    assert info.converged
    assert np.abs(mu.weights - exact).max() <= 2 * tol


def test_discounted_distribution_mu_dependent_fixed_point():
    rng = np.random.default_rng(5)
    base = rng.dirichlet(np.ones(3), size=(3, 1))

    def transitions(n, mu):
        return 0.5 * base + 0.5 * np.asarray(mu)[None, None, :]

    model = tabular_model(transitions, np.zeros((3, 1)), [1.0, 0.0, 0.0])
    pi = StationaryPolicy.uniform(3, 1)
    m0 = Distribution([1.0, 0.0, 0.0])
    gamma = 0.7
    nu, info = discounted_distribution(m0, pi, model, gamma, tol=1e-12)
    M = transitions(0, nu.weights)[:, 0, :]
    rebuilt = (1 - gamma) * np.linalg.solve((np.eye(3) - gamma * M).T, m0.weights)
    assert info.converged and np.allclose(nu.weights, rebuilt, atol=1e-10)
