"""Single-agent solvers against a frozen mean field.

Stationary backups use the model's discount. Finite-horizon backups are
undiscounted sums of rewards up to and including the terminal step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    Distribution,
    FiniteMfgModel,
    MeanFieldFlow,
    QFunction,
    StationaryPolicy,
    TimePolicy,
    TimeQFunction,
)

TIE_TOL = 1e-9
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class PolicyExtraction:
    mode: str = "argmax"
    temperature: float = 1.0

    def __post_init__(self):
        if self.mode not in ("argmax", "softmax"):
            raise ValueError(f"unknown extraction mode {self.mode!r}")
        if self.mode == "softmax" and not self.temperature > 0:
            raise ValueError("softmax temperature must be positive")


ARGMAX = PolicyExtraction("argmax")


class Convergence(NamedTuple):
    converged: bool
    iterations: int
    residual: float


def greedy_table(q: np.ndarray) -> np.ndarray:
    """Uniform mixture over near-maximal actions, row-wise on the last axis."""
    best = q.max(axis=-1, keepdims=True)
    ties = (q >= best - TIE_TOL).astype(float)
    return ties / ties.sum(axis=-1, keepdims=True)


def softmax_table(q: np.ndarray, tau: float) -> np.ndarray:
    z = tau * (q - q.max(axis=-1, keepdims=True))
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def extract_table(q: np.ndarray, how: PolicyExtraction = ARGMAX) -> np.ndarray:
    if how.mode == "argmax":
        return greedy_table(q)
    return softmax_table(q, how.temperature)


def extract_policy(Q: QFunction, how: PolicyExtraction = ARGMAX) -> StationaryPolicy:
    return StationaryPolicy(extract_table(np.asarray(Q.table), how))


def state_value(Q: QFunction, pi: StationaryPolicy) -> np.ndarray:
    """V(x) = sum_a pi(a|x) Q(x, a)."""
    return np.einsum("xa,xa->x", np.asarray(pi.table), np.asarray(Q.table))


def _stationary_model_check(model: FiniteMfgModel) -> None:
    if not model.discount < 1.0:
        raise ValueError("infinite-horizon backups need discount < 1")


def _backup(q_next_value: np.ndarray, R: np.ndarray, P: np.ndarray, gamma: float) -> np.ndarray:
    return R + gamma * (P @ q_next_value)


def bellman_backup_policy(
    Q: QFunction, pi: StationaryPolicy, mu: Distribution, model: FiniteMfgModel
) -> QFunction:
    _stationary_model_check(model)
    R = model.reward_matrix(0, mu)
    P = model.transition_matrix(0, mu)
    v = np.einsum("xa,xa->x", np.asarray(pi.table), np.asarray(Q.table))
    return QFunction(_backup(v, R, P, model.discount))


def bellman_backup_optimal(Q: QFunction, mu: Distribution, model: FiniteMfgModel) -> QFunction:
    _stationary_model_check(model)
    R = model.reward_matrix(0, mu)
    P = model.transition_matrix(0, mu)
    return QFunction(_backup(np.asarray(Q.table).max(axis=1), R, P, model.discount))


def _iterate(step, q0: np.ndarray, tol: float, max_iter: int):
    q = q0
    residual = np.inf
    for k in range(1, max_iter + 1):
        q_new = step(q)
        residual = float(np.max(np.abs(q_new - q))) if q.size else 0.0
        q = q_new
        if residual <= tol:
            return q, Convergence(True, k, residual)
    return q, Convergence(False, max_iter, residual)


def value_iteration(
    mu: Distribution,
    model: FiniteMfgModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[QFunction, Convergence]:
    """Iterate the optimal Bellman operator from Q = 0 until successive
    iterates differ by at most ``tol``; the returned Q then has Bellman
    residual at most gamma * tol."""
    _stationary_model_check(model)
    R = model.reward_matrix(0, mu)
    P = model.transition_matrix(0, mu)
    q, info = _iterate(
        lambda q: _backup(q.max(axis=1), R, P, model.discount), np.zeros_like(R), tol, max_iter
    )
    return QFunction(q), info


def policy_evaluation(
    pi: StationaryPolicy,
    mu: Distribution,
    model: FiniteMfgModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[QFunction, Convergence]:
    _stationary_model_check(model)
    R = model.reward_matrix(0, mu)
    P = model.transition_matrix(0, mu)
    table = np.asarray(pi.table)
    q, info = _iterate(
        lambda q: _backup(np.einsum("xa,xa->x", table, q), R, P, model.discount),
        np.zeros_like(R),
        tol,
        max_iter,
    )
    return QFunction(q), info


def policy_iteration(
    mu: Distribution,
    model: FiniteMfgModel,
    eval_tol: float = DEFAULT_TOL,
    max_outer: int = 1_000,
) -> tuple[StationaryPolicy, Convergence]:
    """Alternate exact-ish evaluation and greedy improvement until the policy is
    greedy with respect to its own Q."""
    pi = StationaryPolicy.uniform(model.n_states, model.n_actions)
    residual = np.inf
    for k in range(1, max_outer + 1):
        Q, _ = policy_evaluation(pi, mu, model, tol=eval_tol)
        new = greedy_table(np.asarray(Q.table))
        residual = float(np.max(np.abs(new - np.asarray(pi.table))))
        pi = StationaryPolicy(new)
        if residual == 0.0:
            return pi, Convergence(True, k, 0.0)
    return pi, Convergence(False, max_outer, residual)


def _flow_tables(flow, model: FiniteMfgModel):
    horizon = model.require_finite_horizon()
    mus = np.asarray(flow, dtype=float)
    if mus.shape != (horizon + 1, model.n_states):
        raise ValueError(f"flow must have {horizon + 1} steps over {model.n_states} states")
    rewards = [model.reward_matrix(n, mus[n]) for n in range(horizon + 1)]
    transitions = [model.transition_matrix(n, mus[n]) for n in range(horizon)]
    return horizon, rewards, transitions


def backward_optimal_tables(flow, model: FiniteMfgModel) -> np.ndarray:
    horizon, R, P = _flow_tables(flow, model)
    q = np.empty((horizon + 1, model.n_states, model.n_actions))
    q[horizon] = R[horizon]
    for n in range(horizon - 1, -1, -1):
        q[n] = R[n] + P[n] @ q[n + 1].max(axis=1)
    return q


def backward_policy_tables(flow, pi_tables: np.ndarray, model: FiniteMfgModel) -> np.ndarray:
    horizon, R, P = _flow_tables(flow, model)
    if pi_tables.shape != (horizon + 1, model.n_states, model.n_actions):
        raise ValueError("policy length does not match the horizon")
    q = np.empty((horizon + 1, model.n_states, model.n_actions))
    q[horizon] = R[horizon]
    for n in range(horizon - 1, -1, -1):
        v_next = np.einsum("xa,xa->x", pi_tables[n + 1], q[n + 1])
        q[n] = R[n] + P[n] @ v_next
    return q


def backward_induction_optimal(
    flow: MeanFieldFlow, model: FiniteMfgModel, how: PolicyExtraction = ARGMAX
) -> tuple[TimeQFunction, TimePolicy]:
    q = backward_optimal_tables(flow, model)
    return TimeQFunction(q), TimePolicy(extract_table(q, how))


def backward_induction_policy(
    flow: MeanFieldFlow, pi: TimePolicy, model: FiniteMfgModel
) -> TimeQFunction:
    return TimeQFunction(backward_policy_tables(flow, np.asarray(pi.tables), model))


def initial_value(q0: np.ndarray, pi0: np.ndarray, m0: np.ndarray) -> float:
    """sum_x m0(x) sum_a pi0(a|x) Q0(x, a)."""
    return float(m0 @ np.einsum("xa,xa->x", pi0, q0))
