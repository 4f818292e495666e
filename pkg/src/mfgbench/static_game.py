"""One-shot mean field games: each player picks an action, the payoff depends
on the action and on the distribution of actions in the population."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ActionSpace, Distribution, lattice_size, simplex_lattice

TIE_TOL = 1e-9
MAX_GRID_POINTS = 10_000_000


@dataclass(frozen=True)
class StaticGame:
    action_space: ActionSpace
    reward: Callable[[int, Distribution], float]
    reward_vector: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def rewards(self, xi) -> np.ndarray:
        """Vector r(., xi) over actions."""
        if self.reward_vector is not None:
            r = np.asarray(self.reward_vector(np.asarray(xi, dtype=float)), dtype=float)
        else:
            dist = xi if isinstance(xi, Distribution) else Distribution(xi)
            r = np.array([self.reward(a, dist) for a in range(self.action_space.size)])
        if not np.all(np.isfinite(r)):
            raise ValueError("static reward is not finite")
        return r


def beach_game(n_positions: int = 11, stall: float = 0.5, floor: float = 1e-10) -> StaticGame:
    """Towels on a beach: r(a, xi) = -|a - stall| - ln xi(a) on an evenly spaced
    grid of positions in [0, 1]; xi(a) is floored before the log."""
    positions = np.linspace(0.0, 1.0, n_positions)

    def reward_vector(xi):
        return -np.abs(positions - stall) - np.log(np.maximum(xi, floor))

    return StaticGame(
        action_space=ActionSpace(n_positions, labels=tuple(float(p) for p in positions)),
        reward=lambda a, xi: float(reward_vector(np.asarray(xi))[a]),
        reward_vector=reward_vector,
    )


def congestion_game(n_actions: int = 2) -> StaticGame:
    """r(a, xi) = -xi(a)."""
    return StaticGame(
        action_space=ActionSpace(n_actions),
        reward=lambda a, xi: -float(xi[a]),
        reward_vector=lambda xi: -np.asarray(xi),
    )


def j_static(pi, xi, game: StaticGame) -> float:
    return float(np.asarray(pi, dtype=float) @ game.rewards(xi))


def best_response_static(xi, game: StaticGame) -> Distribution:
    r = game.rewards(xi)
    ties = (r >= r.max() - TIE_TOL).astype(float)
    return Distribution(ties / ties.sum())


def static_exploitability(xi, game: StaticGame) -> float:
    r = game.rewards(xi)
    return float(r.max() - np.asarray(xi, dtype=float) @ r)


def static_welfare(pi, game: StaticGame) -> float:
    """Average reward when the whole population plays ``pi``."""
    return j_static(pi, pi, game)


def static_fictitious_play(game: StaticGame, iters: int) -> tuple[Distribution, np.ndarray]:
    """Average best responses, starting from the uniform distribution.

    Returns the final average and the exploitability of the average after each
    update."""
    if iters < 1:
        raise ValueError("iters must be at least 1")
    n = game.action_space.size
    xi = np.full(n, 1.0 / n)
    trace = np.empty(iters)
    for ell in range(iters):
        br = np.asarray(best_response_static(xi, game))
        xi = (ell * xi + br) / (ell + 1)
        trace[ell] = static_exploitability(xi, game)
    return Distribution(xi), trace


def static_social_optimum(game: StaticGame, grid_step: float) -> Distribution:
    """Exhaustive search of the welfare J(pi; pi) over the simplex grid of mesh
    ``grid_step``; ties go to the lexicographically first grid point."""
    if not 0.0 < grid_step <= 1.0:
        raise ValueError("grid_step must lie in (0, 1]")
    k = int(round(1.0 / grid_step))
    if abs(k * grid_step - 1.0) > 1e-9:
        raise ValueError("1 / grid_step must be an integer")
    n = game.action_space.size
    if lattice_size(k, n) > MAX_GRID_POINTS:
        raise ValueError(f"grid of {lattice_size(k, n)} points is too large")
    best, best_value = None, -np.inf
    for point in simplex_lattice(k, n):
        value = static_welfare(point, game)
        if value > best_value:
            best, best_value = point, value
    return Distribution(best)
