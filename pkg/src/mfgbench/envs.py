"""Concrete game models: the four-rooms exploration grid and small analytic games."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ActionSpace, Distribution, FiniteMfgModel, StateSpace

# (d_row, d_col): up, left, stay, right, down
GRID_ACTIONS = ((-1, 0), (0, -1), (0, 0), (0, 1), (1, 0))
GRID_ACTION_LABELS = ("up", "left", "stay", "right", "down")
NOISE_MOVES = ((0, 0), (-1, 0), (0, -1), (0, 1), (1, 0))


def four_rooms_walls(width: int = 11, height: int = 11) -> frozenset:
    """Boundary walls plus a cross splitting the interior into four rooms, with
    a door in the middle of each of the four inner wall segments."""
    if width < 5 or height < 5:
        raise ValueError("four rooms needs at least a 5x5 grid")
    walls = set()
    for c in range(width):
        walls.add((0, c))
        walls.add((height - 1, c))
    for r in range(height):
        walls.add((r, 0))
        walls.add((r, width - 1))
    mid_r, mid_c = height // 2, width // 2
    for c in range(1, width - 1):
        walls.add((mid_r, c))
    for r in range(1, height - 1):
        walls.add((r, mid_c))
    doors = [
        (mid_r, (1 + mid_c - 1) // 2),
        (mid_r, (mid_c + 1 + width - 2) // 2),
        ((1 + mid_r - 1) // 2, mid_c),
        ((mid_r + 1 + height - 2) // 2, mid_c),
    ]
    return frozenset(walls.difference(doors))


@dataclass(frozen=True)
class GridWorldSpec:
    width: int = 11
    height: int = 11
    walls: Optional[frozenset] = None
    p_noise: float = 0.1
    reward_floor: float = 1e-10
    start: tuple = (((1, 1), 1.0),)
    horizon: int = 40
    discount: float = 0.9
    noise_center: str = "target"

    def __post_init__(self):
        if self.walls is None:
            object.__setattr__(self, "walls", four_rooms_walls(self.width, self.height))
        else:
            object.__setattr__(self, "walls", frozenset(tuple(w) for w in self.walls))
        object.__setattr__(
            self, "start", tuple((tuple(cell), float(w)) for cell, w in self.start)
        )
        if not 0.0 <= self.p_noise < 1.0:
            raise ValueError("p_noise must lie in [0, 1)")
        if not self.reward_floor > 0:
            raise ValueError("reward_floor must be positive")
        if self.noise_center not in ("target", "origin"):
            raise ValueError("noise_center is 'target' or 'origin'")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        for cell, _ in self.start:
            if cell in self.walls or not self._inside(cell):
                raise ValueError(f"start cell {cell} is not a free cell")

    def _inside(self, cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def free_cells(self) -> list[tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if (r, c) not in self.walls
        ]

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "walls": sorted([list(w) for w in self.walls]),
            "p_noise": self.p_noise,
            "reward_floor": self.reward_floor,
            "start": [[list(cell), w] for cell, w in self.start],
            "horizon": self.horizon,
            "discount": self.discount,
            "noise_center": self.noise_center,
        }


def grid_distances(cells: Sequence[tuple[int, int]]) -> np.ndarray:
    """All-pairs BFS hop counts over 4-connected free cells."""
    index = {cell: i for i, cell in enumerate(cells)}
    n = len(cells)
    d = np.full((n, n), -1, dtype=int)
    for s, start in enumerate(cells):
        d[s, s] = 0
        queue = deque([start])
        while queue:
            r, c = queue.popleft()
            here = d[s, index[(r, c)]]
            for dr, dc in GRID_ACTIONS:
                j = index.get((r + dr, c + dc))
                if j is not None and d[s, j] < 0:
                    d[s, j] = here + 1
                    queue.append(cells[j])
    if np.any(d < 0):
        raise ValueError("the free cells of the grid are not connected")
    return d.astype(float)


def build_four_rooms(spec: GridWorldSpec = GridWorldSpec()) -> FiniteMfgModel:
    """Crowd-averse exploration on a grid: reward -log mu(x), moves by one cell
    or stays, with a small chance of being pushed to a neighbour."""
    cells = spec.free_cells()
    index = {cell: i for i, cell in enumerate(cells)}
    distances = grid_distances(cells)
    S, A = len(cells), len(GRID_ACTIONS)

    def neighbours(cell):
        out = []
        for dr, dc in NOISE_MOVES:
            j = index.get((cell[0] + dr, cell[1] + dc))
            if j is not None:
                out.append(j)
        return out

    P = np.zeros((S, A, S))
    for x, cell in enumerate(cells):
        for a, (dr, dc) in enumerate(GRID_ACTIONS):
            target = index.get((cell[0] + dr, cell[1] + dc), x)
            P[x, a, target] += 1.0 - spec.p_noise
            centre = cells[target] if spec.noise_center == "target" else cell
            spread = neighbours(centre)
            for y in spread:
                P[x, a, y] += spec.p_noise / len(spread)
    P.setflags(write=False)

    m0 = np.zeros(S)
    for cell, w in spec.start:
        m0[index[cell]] += w
    floor = spec.reward_floor

    def transition(n, x, a, mu):
        return Distribution(P[x, a])

    def reward(n, x, a, mu):
        return float(-np.log(max(mu[x], floor)))

    def reward_tensor(n, mu):
        r = -np.log(np.maximum(mu, floor))
        return np.broadcast_to(r[:, None], (S, A))

    return FiniteMfgModel(
        state_space=StateSpace(S, labels=tuple(cells), graph_distance=distances),
        action_space=ActionSpace(A, labels=GRID_ACTION_LABELS),
        transition=transition,
        reward=reward,
        initial_distribution=Distribution(m0 / m0.sum()),
        horizon=spec.horizon,
        discount=spec.discount,
        transition_tensor=lambda n, mu: P,
        reward_tensor=reward_tensor,
        mu_independent_transition=True,
        name="four_rooms",
    )


@dataclass(frozen=True)
class TwoStateParams:
    """Two states, actions {stay, switch}. Reward -crowd * mu(x) + bonus[x]
    - move_cost * [switch]; a move lands on the wrong state with prob. noise."""

    crowd: float = 1.0
    bonus: tuple = (0.0, 0.0)
    move_cost: float = 0.0
    noise: float = 0.0
    initial: tuple = (0.5, 0.5)
    horizon: Optional[int] = 3
    discount: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if len(self.bonus) != 2 or len(self.initial) != 2:
            raise ValueError("bonus and initial need one entry per state")
        if min(self.initial) < 0 or abs(sum(self.initial) - 1.0) > 1e-9:
            raise ValueError("initial must be a distribution over the two states")
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be non-negative")


def build_two_state_game(params: TwoStateParams = TwoStateParams()) -> FiniteMfgModel:
    P = np.zeros((2, 2, 2))
    for x in range(2):
        for a in range(2):
            intended = x if a == 0 else 1 - x
            P[x, a, intended] = 1.0 - params.noise
            P[x, a, 1 - intended] += params.noise
    P.setflags(write=False)
    bonus = np.asarray(params.bonus, dtype=float)
    cost = np.array([0.0, params.move_cost])

    def reward_tensor(n, mu):
        return (-params.crowd * np.asarray(mu) + bonus)[:, None] - cost[None, :]

    return FiniteMfgModel(
        state_space=StateSpace(2, labels=("left", "right"), graph_distance=1.0 - np.eye(2)),
        action_space=ActionSpace(2, labels=("stay", "switch")),
        transition=lambda n, x, a, mu: Distribution(P[x, a]),
        reward=lambda n, x, a, mu: float(-params.crowd * mu[x] + bonus[x] - cost[a]),
        initial_distribution=Distribution(np.asarray(params.initial, dtype=float)),
        horizon=params.horizon,
        discount=params.discount,
        transition_tensor=lambda n, mu: P,
        reward_tensor=reward_tensor,
        mu_independent_transition=True,
        name="two_state",
    )


RewardTable = Callable[[int, np.ndarray], np.ndarray]


def tabular_model(
    transitions,
    rewards,
    initial,
    horizon: Optional[int] = None,
    discount: float = 0.9,
    distance: Optional[np.ndarray] = None,
    name: str = "tabular",
) -> FiniteMfgModel:
    """Model from arrays or array-valued callables.

    ``transitions`` is an (|S|, |A|, |S|) array, a (N_T, |S|, |A|, |S|) array
    indexed by time, or a callable (n, mu) -> (|S|, |A|, |S|). ``rewards`` is an
    (|S|, |A|) array, a time-indexed (N_T+1, |S|, |A|) array or a callable
    (n, mu) -> (|S|, |A|).
    """
    m0 = np.asarray(initial, dtype=float)
    S = m0.size

    if callable(transitions):
        p_fn = transitions
        mu_free = False
        homogeneous = False
    else:
        P = np.asarray(transitions, dtype=float)
        mu_free = True
        homogeneous = P.ndim == 3
        p_fn = (lambda n, mu: P) if homogeneous else (lambda n, mu: P[n])
    if callable(rewards):
        r_fn = rewards
    else:
        R = np.asarray(rewards, dtype=float)
        r_fn = (lambda n, mu: R) if R.ndim == 2 else (lambda n, mu: R[n])

    probe = np.asarray(p_fn(0, m0))
    A = probe.shape[1]

    return FiniteMfgModel(
        state_space=StateSpace(S, graph_distance=distance),
        action_space=ActionSpace(A),
        transition=lambda n, x, a, mu: Distribution(np.asarray(p_fn(n, np.asarray(mu)))[x, a]),
        reward=lambda n, x, a, mu: float(np.asarray(r_fn(n, np.asarray(mu)))[x, a]),
        initial_distribution=Distribution(m0),
        horizon=horizon,
        discount=discount,
        transition_tensor=p_fn,
        reward_tensor=r_fn,
        mu_independent_transition=mu_free,
        time_homogeneous=homogeneous,
        name=name,
    )


def random_tabular_model(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    horizon: Optional[int] = None,
    discount: float = 0.9,
    crowd: float = 0.0,
    time_varying: bool = False,
) -> FiniteMfgModel:
    """Random dense model. With ``crowd`` > 0 the reward gains a -crowd * mu(x)
    term, making it mean-field dependent."""
    shape = (n_states, n_actions, n_states)
    steps = (horizon if time_varying and horizon else 1,)
    P = rng.dirichlet(np.ones(n_states), size=steps + shape[:2])
    R = rng.normal(size=(steps[0] + (1 if time_varying and horizon else 0), n_states, n_actions))
    m0 = rng.dirichlet(np.ones(n_states))

    def rewards(n, mu):
        base = R[min(n, R.shape[0] - 1)]
        return base - crowd * np.asarray(mu)[:, None]

    transitions = P if time_varying and horizon else P[0]
    return tabular_model(transitions, rewards, m0, horizon=horizon, discount=discount)
