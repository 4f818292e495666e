"""Convergence metrics: exploitability, transport distances, entropy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ._jit import njit
from .core import Distribution, FiniteMfgModel, MeanFieldFlow, StationaryPolicy, TimePolicy
from .mdp import (
    Convergence,
    backward_optimal_tables,
    backward_policy_tables,
    initial_value,
    policy_evaluation,
    value_iteration,
)
from .meanfield import flow_array, stationary_distribution

REPORT_FLOOR = -1e-9
_MASS_EPS = 1e-15


@njit(cache=True)
def _transport_cost(supply, demand, cost):  # pragma: no cover - compiled
    """Successive shortest augmenting paths with node potentials on the
    bipartite transport graph. Dense Dijkstra, O((k+m)^2) per augmentation."""
    k, m = cost.shape
    flow = np.zeros((k, m))
    pot_s = np.zeros(k)
    pot_t = np.zeros(m)
    supply = supply.copy()
    demand = demand.copy()
    inf = np.inf
    for _ in range(4 * (k + m) * (k + m) + 10):
        remaining = 0.0
        for i in range(k):
            if supply[i] > _MASS_EPS:
                remaining += supply[i]
        if remaining <= _MASS_EPS:
            break
        dist_s = np.full(k, inf)
        dist_t = np.full(m, inf)
        done_s = np.zeros(k, dtype=np.bool_)
        done_t = np.zeros(m, dtype=np.bool_)
        prev_s = np.full(k, -1)
        prev_t = np.full(m, -1)
        for i in range(k):
            if supply[i] > _MASS_EPS:
                dist_s[i] = 0.0
        target = -1
        while True:
            best = inf
            node = -1
            is_sink = False
            for i in range(k):
                if not done_s[i] and dist_s[i] < best:
                    best = dist_s[i]
                    node = i
                    is_sink = False
            for j in range(m):
                if not done_t[j] and dist_t[j] < best:
                    best = dist_t[j]
                    node = j
                    is_sink = True
            if node == -1:
                break
            if is_sink:
                done_t[node] = True
                if demand[node] > _MASS_EPS:
                    target = node
                    break
                for i in range(k):
                    if flow[i, node] > 0.0 and not done_s[i]:
                        rc = -cost[i, node] + pot_t[node] - pot_s[i]
                        if rc < 0.0:
                            rc = 0.0
                        nd = best + rc
                        if nd < dist_s[i]:
                            dist_s[i] = nd
                            prev_s[i] = node
            else:
                done_s[node] = True
                for j in range(m):
                    if not done_t[j]:
                        rc = cost[node, j] + pot_s[node] - pot_t[j]
                        if rc < 0.0:
                            rc = 0.0
                        nd = best + rc
                        if nd < dist_t[j]:
                            dist_t[j] = nd
                            prev_t[j] = node
        if target == -1:
            break
        dt = dist_t[target]
        for i in range(k):
            pot_s[i] += min(dist_s[i], dt)
        for j in range(m):
            pot_t[j] += min(dist_t[j], dt)

        delta = demand[target]
        j = target
        while True:
            i = prev_t[j]
            if prev_s[i] == -1:
                delta = min(delta, supply[i])
                break
            jj = prev_s[i]
            delta = min(delta, flow[i, jj])
            j = jj
        demand[target] -= delta
        j = target
        while True:
            i = prev_t[j]
            flow[i, j] += delta
            if prev_s[i] == -1:
                supply[i] -= delta
                break
            jj = prev_s[i]
            flow[i, jj] -= delta
            if flow[i, jj] < 0.0:
                flow[i, jj] = 0.0
            j = jj
    total = 0.0
    for i in range(k):
        for j in range(m):
            total += flow[i, j] * cost[i, j]
    return total


def wasserstein(mu, nu, dist) -> float:
    """Exact optimal transport cost between two distributions under the ground
    metric ``dist``.

    Mass shared by both distributions stays in place (optimal for any metric),
    so only the excess of ``mu`` is routed to the excess of ``nu``.
    """
    a = np.asarray(mu, dtype=float)
    b = np.asarray(nu, dtype=float)
    d = np.asarray(dist, dtype=float)
    if a.shape != b.shape or d.shape != (a.size, a.size):
        raise ValueError("distribution and cost shapes disagree")
    diff = a - b
    src = np.flatnonzero(diff > _MASS_EPS)
    dst = np.flatnonzero(diff < -_MASS_EPS)
    if src.size == 0 or dst.size == 0:
        return 0.0
    supply = diff[src]
    demand = -diff[dst]
    # equalize totals so float drift cannot strand mass
    demand = demand * (supply.sum() / demand.sum())
    cost = np.ascontiguousarray(d[np.ix_(src, dst)])
    return float(_transport_cost(supply, demand, cost))


def flow_wasserstein(f, g, dist) -> float:
    """Mean over time steps of the per-step transport distance."""
    fa = np.asarray(f, dtype=float)
    ga = np.asarray(g, dtype=float)
    if fa.shape != ga.shape:
        raise ValueError("flows have different lengths")
    return float(np.mean([wasserstein(x, y, dist) for x, y in zip(fa, ga)]))


def entropy(mu) -> float:
    w = np.asarray(mu, dtype=float)
    nz = w[w > 0]
    return float(-(nz * np.log(nz)).sum())


def policy_distance(pi, sigma) -> float:
    """Mean over states (and time steps) of the total-variation distance between
    action distributions. A pragmatic policy metric, not a transport one."""
    p = np.asarray(pi, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if p.shape != s.shape:
        raise ValueError("policies have different shapes")
    return float(0.5 * np.abs(p - s).sum(axis=-1).mean())


@dataclass(frozen=True)
class ExploitabilityReport:
    value: float
    raw: float
    best_value: float
    policy_value: float
    mean_field: np.ndarray
    convergence: Convergence = Convergence(True, 0, 0.0)


def _finite_report(pi_tables: np.ndarray, model: FiniteMfgModel) -> ExploitabilityReport:
    m0 = np.asarray(model.initial_distribution)
    mus = flow_array(m0, pi_tables, model)
    q_star = backward_optimal_tables(mus, model)
    q_pi = backward_policy_tables(mus, pi_tables, model)
    best = float(m0 @ q_star[0].max(axis=1))
    own = initial_value(q_pi[0], pi_tables[0], m0)
    raw = best - own
    return ExploitabilityReport(max(raw, REPORT_FLOOR), raw, best, own, mus)


def _stationary_report(pi: StationaryPolicy, model: FiniteMfgModel) -> ExploitabilityReport:
    mu, mf_info = stationary_distribution(pi, model)
    q_star, vi_info = value_iteration(mu, model)
    q_pi, pe_info = policy_evaluation(pi, mu, model)
    w = np.asarray(mu)
    best = float(w @ np.asarray(q_star.table).max(axis=1))
    own = float(w @ np.einsum("xa,xa->x", np.asarray(pi.table), np.asarray(q_pi.table)))
    raw = best - own
    ok = mf_info.converged and vi_info.converged and pe_info.converged
    info = Convergence(ok, mf_info.iterations, mf_info.residual)
    return ExploitabilityReport(max(raw, REPORT_FLOOR), raw, best, own, w, info)


def exploitability_report(
    pi: Union[TimePolicy, StationaryPolicy], model: FiniteMfgModel
) -> ExploitabilityReport:
    if model.finite_horizon:
        return _finite_report(np.asarray(pi, dtype=float), model)
    return _stationary_report(pi, model)


def exploitability(pi: Union[TimePolicy, StationaryPolicy], model: FiniteMfgModel) -> float:
    """sup over deviations of J(.; mu^pi) minus J(pi; mu^pi).

    Finite horizon: mu^pi is the flow from m_0 and J aggregates Q_0 over m_0.
    Stationary: mu^pi is the stationary distribution and J aggregates V over it.
    Values below -1e-9 are reported as -1e-9; the raw value is on
    :func:`exploitability_report`.
    """
    return exploitability_report(pi, model).value


def approximate_exploitability(
    pi: TimePolicy, candidates: Sequence[TimePolicy], model: FiniteMfgModel
) -> float:
    """Exploitability with the sup restricted to ``candidates``."""
    if not candidates:
        raise ValueError("candidate set is empty")
    m0 = np.asarray(model.initial_distribution)
    tables = np.asarray(pi, dtype=float)
    mus = flow_array(m0, tables, model)
    own = initial_value(backward_policy_tables(mus, tables, model)[0], tables[0], m0)
    best = -np.inf
    for c in candidates:
        ct = np.asarray(c, dtype=float)
        best = max(best, initial_value(backward_policy_tables(mus, ct, model)[0], ct[0], m0))
    return best - own
