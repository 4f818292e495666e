"""Shared domain types: spaces, distributions, policies, flows, value tables and
the finite mean field game model.

All containers are frozen dataclasses wrapping read-only numpy arrays. Solvers
work on the raw arrays internally and wrap results at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _check_simplex(weights: np.ndarray, axis: int = -1) -> np.ndarray:
    """Validate rows along ``axis`` and renormalize them. Raises on rows farther
    than SIMPLEX_TOL from the simplex."""
    if not np.all(np.isfinite(weights)):
        raise ValueError("probability weights must be finite")
    if np.any(weights < -SIMPLEX_TOL):
        raise ValueError(f"negative probability weight {weights.min():.3e}")
    sums = weights.sum(axis=axis, keepdims=True)
    if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
        worst = np.max(np.abs(sums - 1.0))
        raise ValueError(f"probability weights sum off by {worst:.3e}")
    weights = np.clip(weights, 0.0, None)
    return weights / weights.sum(axis=axis, keepdims=True)


def _check_distance(d: np.ndarray) -> None:
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("graph_distance must be square")
    if np.any(d < 0):
        raise ValueError("graph_distance must be non-negative")
    if np.any(np.diag(d) != 0):
        raise ValueError("graph_distance must vanish on the diagonal")
    if not np.array_equal(d, d.T):
        raise ValueError("graph_distance must be symmetric")
    for k in range(d.shape[0]):
        if np.any(d[:, k, None] + d[None, k, :] < d - 1e-12):
            raise ValueError("graph_distance violates the triangle inequality")


@dataclass(frozen=True)
class StateSpace:
    size: int
    labels: Optional[tuple] = None
    graph_distance: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("state space must be non-empty")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.size:
                raise ValueError("labels length must equal size")
        if self.graph_distance is None:
            # discrete metric when no geometry is supplied
            d = 1.0 - np.eye(self.size)
        else:
            d = np.asarray(self.graph_distance, dtype=float)
            if d.shape != (self.size, self.size):
                raise ValueError("graph_distance must be |S| x |S|")
            _check_distance(d)
        object.__setattr__(self, "graph_distance", _frozen(d))


@dataclass(frozen=True)
class ActionSpace:
    size: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("action space must be non-empty")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.size:
                raise ValueError("labels length must equal size")


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite set."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("a distribution is a non-empty vector")
        object.__setattr__(self, "weights", _frozen(_check_simplex(w)))

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, n: int, i: int) -> "Distribution":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)

    def __len__(self) -> int:
        return self.weights.size

    def __getitem__(self, i):
        return self.weights[i]

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)


@dataclass(frozen=True)
class StationaryPolicy:
    """Row-stochastic |S| x |A| table; row x is pi(.|x)."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("policy table must be 2-d")
        object.__setattr__(self, "table", _frozen(_check_simplex(t, axis=1)))

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "StationaryPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "StationaryPolicy":
        actions = np.asarray(actions, dtype=int)
        t = np.zeros((actions.size, n_actions))
        t[np.arange(actions.size), actions] = 1.0
        return cls(t)

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.table if dtype is None else self.table.astype(dtype)


@dataclass(frozen=True)
class TimePolicy:
    """Time-indexed policy stored as an (N_T+1, |S|, |A|) array.

    The last step never drives the dynamics; it is kept so that policies and
    time-indexed Q tables share one indexing.
    """

    tables: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tables, dtype=float)
        if t.ndim != 3 or t.shape[0] == 0:
            raise ValueError("time policy must be (N_T+1, |S|, |A|)")
        object.__setattr__(self, "tables", _frozen(_check_simplex(t, axis=2)))

    @classmethod
    def from_steps(cls, steps: Sequence[StationaryPolicy]) -> "TimePolicy":
        if not steps:
            raise ValueError("need at least one step")
        return cls(np.stack([np.asarray(s.table) for s in steps]))

    @classmethod
    def constant(cls, policy: StationaryPolicy, horizon: int) -> "TimePolicy":
        return cls(np.broadcast_to(policy.table, (horizon + 1,) + policy.table.shape))

    @classmethod
    def uniform(cls, horizon: int, n_states: int, n_actions: int) -> "TimePolicy":
        return cls(np.full((horizon + 1, n_states, n_actions), 1.0 / n_actions))

    @property
    def horizon(self) -> int:
        return self.tables.shape[0] - 1

    @property
    def steps(self) -> list[StationaryPolicy]:
        return [StationaryPolicy(t) for t in self.tables]

    def __len__(self) -> int:
        return self.tables.shape[0]

    def __getitem__(self, n: int) -> StationaryPolicy:
        return StationaryPolicy(self.tables[n])

    def __array__(self, dtype=None, copy=None):
        return self.tables if dtype is None else self.tables.astype(dtype)


@dataclass(frozen=True)
class MeanFieldFlow:
    """Sequence (mu_0, ..., mu_N_T) stored as an (N_T+1, |S|) array."""

    steps_array: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.steps_array, dtype=float)
        if f.ndim != 2 or f.shape[0] == 0:
            raise ValueError("flow must be (N_T+1, |S|)")
        object.__setattr__(self, "steps_array", _frozen(_check_simplex(f, axis=1)))

    @classmethod
    def from_steps(cls, steps: Sequence[Distribution]) -> "MeanFieldFlow":
        if not steps:
            raise ValueError("need at least one step")
        return cls(np.stack([np.asarray(s.weights) for s in steps]))

    @property
    def horizon(self) -> int:
        return self.steps_array.shape[0] - 1

    @property
    def steps(self) -> list[Distribution]:
        return [Distribution(m) for m in self.steps_array]

    def __len__(self) -> int:
        return self.steps_array.shape[0]

    def __getitem__(self, n: int) -> Distribution:
        return Distribution(self.steps_array[n])

    def __array__(self, dtype=None, copy=None):
        return self.steps_array if dtype is None else self.steps_array.astype(dtype)


@dataclass(frozen=True)
class QFunction:
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("Q table must be 2-d")
        if not np.all(np.isfinite(t)):
            raise ValueError("Q table must be finite")
        object.__setattr__(self, "table", _frozen(t))

    def __array__(self, dtype=None, copy=None):
        return self.table if dtype is None else self.table.astype(dtype)


@dataclass(frozen=True)
class TimeQFunction:
    tables: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tables, dtype=float)
        if t.ndim != 3:
            raise ValueError("time Q must be (N_T+1, |S|, |A|)")
        if not np.all(np.isfinite(t)):
            raise ValueError("Q tables must be finite")
        object.__setattr__(self, "tables", _frozen(t))

    @property
    def steps(self) -> list[QFunction]:
        return [QFunction(t) for t in self.tables]

    def __len__(self) -> int:
        return self.tables.shape[0]

    def __getitem__(self, n: int) -> QFunction:
        return QFunction(self.tables[n])

    def __array__(self, dtype=None, copy=None):
        return self.tables if dtype is None else self.tables.astype(dtype)


TransitionFn = Callable[[int, int, int, Distribution], Distribution]
RewardFn = Callable[[int, int, int, Distribution], float]
TensorFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FiniteMfgModel:
    """The tuple (S, A, p, r, N_T, m_0, gamma).

    ``transition(n, x, a, mu)`` and ``reward(n, x, a, mu)`` are the pointwise
    definitions. Environments may also supply vectorized versions
    ``transition_tensor(n, mu) -> (|S|, |A|, |S|)`` and
    ``reward_tensor(n, mu) -> (|S|, |A|)``; every solver goes through
    :meth:`transition_matrix` and :meth:`reward_matrix`, which fall back to the
    pointwise callables.

    ``horizon=None`` marks an infinite-horizon (stationary) model. Set
    ``mu_independent_transition`` when p ignores the mean field; solvers then
    reuse one transition tensor per time step.
    """

    state_space: StateSpace
    action_space: ActionSpace
    transition: TransitionFn
    reward: RewardFn
    initial_distribution: Distribution
    horizon: Optional[int] = None
    discount: float = 0.9
    transition_tensor: Optional[TensorFn] = None
    reward_tensor: Optional[TensorFn] = None
    mu_independent_transition: bool = False
    time_homogeneous: bool = True
    name: str = "model"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if len(self.initial_distribution) != self.state_space.size:
            raise ValueError("initial distribution has the wrong size")

    @property
    def n_states(self) -> int:
        return self.state_space.size

    @property
    def n_actions(self) -> int:
        return self.action_space.size

    @property
    def finite_horizon(self) -> bool:
        return self.horizon is not None

    def require_finite_horizon(self) -> int:
        if self.horizon is None:
            raise ValueError("operation requires a finite-horizon model")
        return self.horizon

    def transition_matrix(self, n: int, mu) -> np.ndarray:
        """Return P[x, a, y] = p_n(y | x, a, mu)."""
        if self.mu_independent_transition:
            key = ("P", 0 if self.time_homogeneous else n)
            cached = self._cache.get(key)
            if cached is not None:
                return cached
        mu = np.asarray(mu, dtype=float)
        if self.transition_tensor is not None:
            P = np.asarray(self.transition_tensor(n, mu), dtype=float)
        else:
            dist = Distribution(mu)
            S, A = self.n_states, self.n_actions
            P = np.empty((S, A, S))
            for x in range(S):
                for a in range(A):
                    P[x, a] = np.asarray(self.transition(n, x, a, dist))
        if P.shape != (self.n_states, self.n_actions, self.n_states):
            raise ValueError(f"transition tensor has shape {P.shape}")
        if np.any(P < -SIMPLEX_TOL) or np.any(np.abs(P.sum(axis=2) - 1.0) > SIMPLEX_TOL):
            raise ValueError("model transition is not a valid distribution")
        if self.mu_independent_transition:
            P.setflags(write=False)
            self._cache[key] = P
        return P

    def reward_matrix(self, n: int, mu) -> np.ndarray:
        """Return R[x, a] = r_n(x, a, mu)."""
        mu = np.asarray(mu, dtype=float)
        if self.reward_tensor is not None:
            R = np.asarray(self.reward_tensor(n, mu), dtype=float)
        else:
            dist = Distribution(mu)
            R = np.array(
                [[self.reward(n, x, a, dist) for a in range(self.n_actions)]
                 for x in range(self.n_states)],
                dtype=float,
            )
        if R.shape != (self.n_states, self.n_actions):
            raise ValueError(f"reward table has shape {R.shape}")
        if not np.all(np.isfinite(R)):
            raise ValueError("model reward is not finite")
        return R


def convex_mix(a: Distribution, b: Distribution, alpha: float) -> Distribution:
    """Return (1 - alpha) * a + alpha * b."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if len(a) != len(b):
        raise ValueError("distributions live on different spaces")
    if alpha == 1.0:
        return b
    if alpha == 0.0:
        return a
    w = (1.0 - alpha) * a.weights + alpha * b.weights
    return Distribution(w / w.sum())


def mix_arrays(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Array version of :func:`convex_mix`, applied row-wise for flows."""
    if alpha == 1.0:
        return np.array(b, dtype=float)
    if alpha == 0.0:
        return np.array(a, dtype=float)
    w = (1.0 - alpha) * a + alpha * b
    return w / w.sum(axis=-1, keepdims=True)


def average_policy_tables(numerator: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Divide accumulated state-action mass by state mass; uniform where the
    state carries no mass."""
    n_actions = numerator.shape[-1]
    out = np.full(numerator.shape, 1.0 / n_actions)
    visited = mass > 0
    out[visited] = numerator[visited] / mass[visited][:, None]
    out /= out.sum(axis=-1, keepdims=True)
    return out


def visitation_weighted_policy_average(
    policies: Sequence[TimePolicy],
    flows: Sequence[MeanFieldFlow],
    weights: Sequence[float],
) -> TimePolicy:
    """Mix policies with weights proportional to how much mass each one puts on
    every state, so that for mu-independent dynamics the mixture generates the
    weighted average of the flows."""
    if not policies:
        raise ValueError("need at least one policy")
    if not len(policies) == len(flows) == len(weights):
        raise ValueError("policies, flows and weights must have equal length")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("weights must be non-negative and sum to one")
    pis = np.stack([np.asarray(p) for p in policies])
    mus = np.stack([np.asarray(f) for f in flows])
    if pis.shape[:3] != mus.shape:
        raise ValueError("policy and flow shapes disagree")
    numerator = np.einsum("k,kns,knsa->nsa", w, mus, pis)
    mass = np.einsum("k,kns->ns", w, mus)
    return TimePolicy(average_policy_tables(numerator, mass))


def simplex_lattice(k: int, d: int) -> np.ndarray:
    """All vectors of ``d`` non-negative multiples of 1/k summing to one, in
    lexicographic order of their coordinates."""
    if k < 1 or d < 1:
        raise ValueError("mesh and dimension must be positive")
    if d == 1:
        return np.ones((1, 1))
    rows = []

    def fill(prefix: list, left: int, slots: int):
        if slots == 1:
            rows.append(prefix + [left])
            return
        for v in range(left + 1):
            fill(prefix + [v], left - v, slots - 1)

    fill([], k, d)
    return np.array(rows, dtype=float) / k


def lattice_size(k: int, d: int) -> int:
    from math import comb

    return comb(k + d - 1, d - 1)
