"""Model-free best responses: tabular Q-learning against a frozen mean field.

The learner only sees sampled transitions and rewards from
:class:`FrozenMeanFieldEnv`; the mean field itself stays inside the
environment. One Q table is kept per time step.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._jit import njit
from .core import Distribution, FiniteMfgModel, MeanFieldFlow, TimeQFunction
from .equilibrium import SolveResult, SolverConfig, run_scheme


class PolynomialRate:
    """Learning rate 1 / k**power for the k-th update of a table entry."""

    def __init__(self, power: float = 0.8):
        if not 0.0 < power <= 1.0:
            raise ValueError("power must lie in (0, 1]")
        self.power = power

    def __call__(self, k):
        return 1.0 / np.power(np.asarray(k, dtype=float), self.power)

    def __repr__(self) -> str:
        return f"PolynomialRate({self.power})"


@dataclass(frozen=True)
class QLearningConfig:
    episodes: int = 20_000
    learning_rate: Callable = PolynomialRate(0.8)
    epsilon: float = 0.2
    seed: int = 0
    exploring_starts: bool = False
    chunk: int = 2_000
    # per-step reward bound; Q_n starts at (N_T + 1 - n) times it when set
    optimistic_reward: Optional[float] = None

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.chunk < 1:
            raise ValueError("chunk must be positive")
        if self.optimistic_reward is not None and not np.isfinite(self.optimistic_reward):
            raise ValueError("optimistic_reward must be finite")

    def rates(self) -> np.ndarray:
        """Learning rate of the k-th update, k = 1..episodes."""
        r = np.asarray(self.learning_rate(np.arange(1, self.episodes + 1)), dtype=float)
        if r.shape != (self.episodes,) or np.any(r <= 0) or np.any(r > 1):
            raise ValueError("learning rates must lie in (0, 1]")
        return r


class SampledTransition(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int


def _inverse_cdf(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), probs.size - 1))


def sample_step(n: int, x: int, a: int, mu, model: FiniteMfgModel, rng: np.random.Generator) -> SampledTransition:
    dist = mu if isinstance(mu, Distribution) else Distribution(mu)
    probs = np.asarray(model.transition(n, x, a, dist))
    y = _inverse_cdf(probs, rng.random())
    return SampledTransition(x, a, float(model.reward(n, x, a, dist)), y)


class FrozenMeanFieldEnv:
    """Finite-horizon environment in which the population follows a fixed flow.

    ``reset`` draws x_0 from m_0 and ``step`` returns the reward and next state
    for the current time step.
    """

    def __init__(self, model: FiniteMfgModel, flow):
        self.horizon = model.require_finite_horizon()
        mus = np.asarray(flow, dtype=float)
        if mus.shape != (self.horizon + 1, model.n_states):
            raise ValueError("flow does not match the model horizon")
        self.n_states = model.n_states
        self.n_actions = model.n_actions
        self._m0_cdf = np.cumsum(np.asarray(model.initial_distribution))
        self._rewards = np.stack([model.reward_matrix(n, mus[n]) for n in range(self.horizon + 1)])
        cdf = np.stack(
            [np.cumsum(model.transition_matrix(n, mus[n]), axis=2) for n in range(self.horizon)]
        ) if self.horizon else np.zeros((0, self.n_states, self.n_actions, self.n_states))
        self._cdf = np.ascontiguousarray(cdf)

    def reset(self, rng: np.random.Generator) -> int:
        return _draw(self._m0_cdf, rng.random())

    def step(self, n: int, x: int, a: int, rng: np.random.Generator) -> SampledTransition:
        r = float(self._rewards[n, x, a])
        y = _draw(self._cdf[n, x, a], rng.random()) if n < self.horizon else x
        return SampledTransition(x, a, r, y)


@njit(cache=True)
def _draw(cdf, u):  # pragma: no cover - compiled
    target = u * cdf[-1]
    for i in range(cdf.size):
        if target < cdf[i]:
            return i
    return cdf.size - 1


@njit(cache=True)
def _run_episodes(q, counts, cdf, rewards, m0_cdf, rates, epsilon,
                  u_start, u_explore, u_action, u_next, exploring_starts):  # pragma: no cover
    n_steps, n_states, n_actions = q.shape
    horizon = n_steps - 1
    xs = np.empty(n_steps, dtype=np.int64)
    acts = np.empty(n_steps, dtype=np.int64)
    for e in range(u_start.size):
        if exploring_starts:
            x = min(int(u_start[e] * n_states), n_states - 1)
        else:
            x = _draw(m0_cdf, u_start[e])
        for n in range(n_steps):
            if u_explore[e, n] < epsilon:
                a = min(int(u_action[e, n] * n_actions), n_actions - 1)
            else:
                a = 0
                for b in range(1, n_actions):
                    if q[n, x, b] > q[n, x, a]:
                        a = b
            xs[n] = x
            acts[n] = a
            if n < horizon:
                x = _draw(cdf[n, x, a], u_next[e, n])
        # backward sweep so each target uses the freshest successor estimate
        for n in range(horizon, -1, -1):
            x = xs[n]
            a = acts[n]
            target = rewards[n, x, a]
            if n < horizon:
                nxt = xs[n + 1]
                best = q[n + 1, nxt, 0]
                for b in range(1, n_actions):
                    if q[n + 1, nxt, b] > best:
                        best = q[n + 1, nxt, b]
                target += best
            counts[n, x, a] += 1
            alpha = rates[counts[n, x, a] - 1]
            q[n, x, a] += alpha * (target - q[n, x, a])


def q_learning_tables(env: FrozenMeanFieldEnv, cfg: QLearningConfig):
    """Run ``cfg.episodes`` episodes; return (Q tables, visit counts)."""
    rng = np.random.default_rng(cfg.seed)
    steps = env.horizon + 1
    q = np.zeros((steps, env.n_states, env.n_actions))
    if cfg.optimistic_reward is not None:
        q += (steps - np.arange(steps))[:, None, None] * float(cfg.optimistic_reward)
    counts = np.zeros(q.shape, dtype=np.int64)
    rates = cfg.rates()
    done = 0
    while done < cfg.episodes:
        size = min(cfg.chunk, cfg.episodes - done)
        u_start = rng.random(size)
        u_explore = rng.random((size, steps))
        u_action = rng.random((size, steps))
        u_next = rng.random((size, steps))
        _run_episodes(q, counts, env._cdf, env._rewards, env._m0_cdf, rates, cfg.epsilon,
                      u_start, u_explore, u_action, u_next, cfg.exploring_starts)
        done += size
    return q, counts


def q_learning_best_response(
    flow: MeanFieldFlow, model: FiniteMfgModel, cfg: QLearningConfig = QLearningConfig()
) -> TimeQFunction:
    """Time-indexed Q-learning with epsilon-greedy behaviour against a frozen
    flow. Undiscounted within the horizon; the last table learns the terminal
    reward."""
    q, _ = q_learning_tables(FrozenMeanFieldEnv(model, flow), cfg)
    return TimeQFunction(q)


def rl_fictitious_play(
    model: FiniteMfgModel,
    solver_cfg: SolverConfig,
    ql_cfg: QLearningConfig = QLearningConfig(),
    callback: Optional[Callable] = None,
) -> SolveResult:
    """Fictitious play whose best responses are learned by Q-learning.

    Each iteration uses an independent seed spawned from ``ql_cfg.seed``.
    Exploitability in the log is computed exactly from the model.
    """
    model.require_finite_horizon()
    if solver_cfg.scheme != "fictitious_play":
        raise ValueError("rl_fictitious_play runs the fictitious_play scheme")
    if solver_cfg.mode != "finite_horizon":
        raise ValueError("rl_fictitious_play needs finite-horizon mode")
    seeds = np.random.SeedSequence(ql_cfg.seed).generate_state(solver_cfg.iterations)

    def learned_q(mu, ell):
        cfg = dataclasses.replace(ql_cfg, seed=int(seeds[ell]))
        q, _ = q_learning_tables(FrozenMeanFieldEnv(model, mu), cfg)
        return q

    return run_scheme(model, solver_cfg, best_response_q=learned_q, callback=callback)
