"""Mean field control: social welfare, the mean field MDP and an exact dynamic
programming solver on a discretized simplex."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple

import numpy as np

from .core import (
    Distribution,
    FiniteMfgModel,
    StationaryPolicy,
    TimePolicy,
    lattice_size,
    simplex_lattice,
)
from .meanfield import flow_array, push_forward_array

MAX_GRID_POINTS = 100_000
MAX_WORK = 200_000_000


@dataclass(frozen=True)
class SimplexGrid:
    """Distributions over ``dim`` states whose coordinates are multiples of 1/mesh."""

    mesh: int
    dim: int
    points: np.ndarray = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if lattice_size(self.mesh, self.dim) > MAX_GRID_POINTS:
            raise ValueError("simplex grid exceeds 1e5 points")
        pts = simplex_lattice(self.mesh, self.dim)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        keys = np.rint(pts * self.mesh).astype(int)
        object.__setattr__(self, "_index", {tuple(k): i for i, k in enumerate(keys)})

    def __len__(self) -> int:
        return self.points.shape[0]

    def project(self, mu) -> int:
        """Index of the L1-nearest grid point.

        Largest-remainder rounding is L1-optimal on the lattice; among equal
        remainders the extra units go to later coordinates, which selects the
        lexicographically smallest of the tied points.
        """
        return self.project_many(np.asarray(mu, dtype=float)[None, :])[0]

    def project_many(self, mus: np.ndarray) -> np.ndarray:
        scaled = mus * self.mesh
        base = np.floor(scaled + 1e-12)
        frac = np.round(scaled - base, 12)
        missing = self.mesh - base.sum(axis=1).astype(int)
        out = np.empty(mus.shape[0], dtype=int)
        idx = np.arange(self.dim)
        for row in range(mus.shape[0]):
            order = np.lexsort((-idx, -frac[row]))
            z = base[row].astype(int)
            z[order[: missing[row]]] += 1
            out[row] = self._index[tuple(z)]
        return out


def mean_field_reward(mu: np.ndarray, pi: np.ndarray, R: np.ndarray) -> float:
    """sum_x sum_a r(x, a, mu) mu(x) pi(a|x)."""
    return float(np.einsum("x,xa,xa->", mu, pi, R))


def social_welfare(pi: TimePolicy, model: FiniteMfgModel) -> float:
    """Total population reward over n = 0..N_T along the flow generated by pi."""
    tables = np.asarray(pi, dtype=float)
    mus = flow_array(np.asarray(model.initial_distribution), tables, model)
    return float(sum(
        mean_field_reward(mus[n], tables[n], model.reward_matrix(n, mus[n]))
        for n in range(mus.shape[0])
    ))


def mfmdp_step(
    mu: Distribution, pi: StationaryPolicy, n: int, model: FiniteMfgModel
) -> tuple[Distribution, float]:
    """Deterministic transition and reward of the MDP whose state is the
    population distribution and whose action is a policy."""
    w = np.asarray(mu)
    table = np.asarray(pi.table)
    nxt = push_forward_array(w, table, model.transition_matrix(n, w))
    return Distribution(nxt), mean_field_reward(w, table, model.reward_matrix(n, w))


@dataclass(frozen=True)
class MfcGridSolution:
    grid: SimplexGrid
    candidates: np.ndarray  # (C, |S|, |A|) one-step policies
    values: np.ndarray  # (N_T+1, G)
    choice: np.ndarray  # (N_T+1, G) candidate index
    start: int
    value: float

    def policy_at(self, n: int, mu) -> StationaryPolicy:
        return StationaryPolicy(self.candidates[self.choice[n, self.grid.project(mu)]])

    def greedy_policy(self, model: FiniteMfgModel) -> TimePolicy:
        """Roll the true dynamics forward from m_0, choosing at every step the
        candidate attached to the grid point nearest the current distribution."""
        mu = np.asarray(model.initial_distribution, dtype=float)
        steps = []
        for n in range(self.values.shape[0]):
            table = self.candidates[self.choice[n, self.grid.project(mu)]]
            steps.append(table)
            if n < self.values.shape[0] - 1:
                mu = push_forward_array(mu, table, model.transition_matrix(n, mu))
        return TimePolicy(np.stack(steps))


def gridded_policies(n_states: int, n_actions: int, action_mesh: int) -> np.ndarray:
    rows = simplex_lattice(action_mesh, n_actions)
    combos = list(product(range(rows.shape[0]), repeat=n_states))
    return np.stack([rows[list(c)] for c in combos])


def solve_mfc_grid(model: FiniteMfgModel, grid: SimplexGrid, action_mesh: int) -> MfcGridSolution:
    """Backward dynamic programming for the mean field MDP with distributions
    projected onto ``grid`` and policies restricted to per-state action
    distributions of mesh 1/action_mesh."""
    horizon = model.require_finite_horizon()
    S, A = model.n_states, model.n_actions
    if S > 3:
        raise ValueError("grid solver supports at most 3 states")
    if grid.dim != S:
        raise ValueError("grid dimension does not match the state space")
    if action_mesh < 1:
        raise ValueError("action_mesh must be positive")
    n_candidates = lattice_size(action_mesh, A) ** S
    if n_candidates * len(grid) * (horizon + 1) * S * A * S > MAX_WORK:
        raise ValueError("grid solver problem too large")
    candidates = gridded_policies(S, A, action_mesh)

    G = len(grid)
    values = np.zeros((horizon + 1, G))
    choice = np.zeros((horizon + 1, G), dtype=int)
    for n in range(horizon, -1, -1):
        for g, mu in enumerate(grid.points):
            R = model.reward_matrix(n, mu)
            rewards = np.einsum("x,cxa,xa->c", mu, candidates, R)
            if n < horizon:
                P = model.transition_matrix(n, mu)
                nxt = np.einsum("x,cxa,xay->cy", mu, candidates, P)
                nxt /= nxt.sum(axis=1, keepdims=True)
                rewards = rewards + values[n + 1][grid.project_many(nxt)]
            best = int(np.argmax(rewards))
            choice[n, g] = best
            values[n, g] = rewards[best]
    start = grid.project(np.asarray(model.initial_distribution))
    return MfcGridSolution(grid, candidates, values, choice, start, float(values[0, start]))


class PriceOfAnarchy(NamedTuple):
    value: float
    mode: str  # "ratio" or "gap"


def price_of_anarchy(
    model: FiniteMfgModel, equilibrium_policy: TimePolicy, mfc_value: float
) -> PriceOfAnarchy:
    """Best social welfare over the welfare of an equilibrium. Falls back to
    the additive gap when either welfare is not strictly positive."""
    eq_value = social_welfare(equilibrium_policy, model)
    if abs(eq_value) < 1e-12:
        raise ValueError("equilibrium welfare is zero; price of anarchy undefined")
    if eq_value > 0 and mfc_value > 0:
        return PriceOfAnarchy(mfc_value / eq_value, "ratio")
    return PriceOfAnarchy(mfc_value - eq_value, "gap")
