"""Propagation of the population distribution."""

from __future__ import annotations

import math

import numpy as np

from .core import Distribution, FiniteMfgModel, MeanFieldFlow, StationaryPolicy, TimePolicy
from .mdp import Convergence


def push_forward_array(mu: np.ndarray, pi: np.ndarray, P: np.ndarray) -> np.ndarray:
    """sum_x mu(x) sum_a pi(a|x) P[x, a, y]."""
    nxt = np.einsum("x,xa,xay->y", mu, pi, P)
    return nxt / nxt.sum()


def push_forward(
    mu: Distribution,
    pi: StationaryPolicy,
    mu_ref: Distribution,
    n: int,
    model: FiniteMfgModel,
) -> Distribution:
    """One step of the population under ``pi`` with the transition kernel
    evaluated at ``mu_ref``."""
    P = model.transition_matrix(n, mu_ref)
    return Distribution(push_forward_array(np.asarray(mu), np.asarray(pi.table), P))


def flow_array(m0: np.ndarray, pi_tables: np.ndarray, model: FiniteMfgModel) -> np.ndarray:
    horizon = model.require_finite_horizon()
    if pi_tables.shape[0] != horizon + 1:
        raise ValueError("policy length does not match the horizon")
    mus = np.empty((horizon + 1, model.n_states))
    mus[0] = m0
    for n in range(horizon):
        P = model.transition_matrix(n, mus[n])
        mus[n + 1] = push_forward_array(mus[n], pi_tables[n], P)
    return mus


def evolutive_flow(m0: Distribution, pi: TimePolicy, model: FiniteMfgModel) -> MeanFieldFlow:
    return MeanFieldFlow(flow_array(np.asarray(m0), np.asarray(pi.tables), model))


def stationary_distribution(
    pi: StationaryPolicy,
    model: FiniteMfgModel,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    damping: float = 0.5,
) -> tuple[Distribution, Convergence]:
    """Damped power iteration for mu = P_{mu,pi}^T mu, started at uniform.

    The residual ||P_{mu,pi}^T mu - mu||_1 of the returned mu is reported; the
    flag is False when ``max_iter`` was hit first.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    table = np.asarray(pi.table)
    mu = np.full(model.n_states, 1.0 / model.n_states)
    residual = np.inf
    for k in range(max_iter + 1):
        image = push_forward_array(mu, table, model.transition_matrix(0, mu))
        residual = float(np.abs(image - mu).sum())
        if residual <= tol:
            return Distribution(mu), Convergence(True, k, residual)
        if k == max_iter:
            break
        mu = (1.0 - damping) * mu + damping * image
        mu /= mu.sum()
    return Distribution(mu), Convergence(False, max_iter, residual)


def _series_length(gamma: float, tol: float) -> int:
    if gamma == 0.0:
        return 0
    return max(0, math.ceil(math.log(tol) / math.log(gamma)))


def discounted_distribution(
    m0: Distribution,
    pi: StationaryPolicy,
    model: FiniteMfgModel,
    gamma: float,
    tol: float = 1e-10,
    max_outer: int = 10_000,
) -> tuple[Distribution, Convergence]:
    """(1 - gamma) sum_n gamma^n mu_n, where the flow's kernel is evaluated at
    the result itself; solved by fixed-point iteration on that argument.

    The series is cut after N terms with gamma^N <= tol and the remaining tail
    mass gamma^(N+1) is folded into the last term so the output stays on the
    simplex.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    start = np.asarray(m0, dtype=float)
    if gamma == 0.0:
        return m0, Convergence(True, 0, 0.0)
    table = np.asarray(pi.table)
    n_terms = _series_length(gamma, tol)
    weights = (1.0 - gamma) * gamma ** np.arange(n_terms + 1)

    nu = start.copy()
    change = np.inf
    for k in range(1, max_outer + 1):
        P = model.transition_matrix(0, nu)
        acc = np.zeros_like(nu)
        mu = start
        for w in weights:
            acc += w * mu
            mu = push_forward_array(mu, table, P)
        acc += (1.0 - weights.sum()) * mu
        acc /= acc.sum()
        change = float(np.abs(acc - nu).sum())
        nu = acc
        if change <= tol or model.mu_independent_transition:
            return Distribution(nu), Convergence(True, k, change)
    return Distribution(nu), Convergence(False, max_outer, change)
