"""Iterative schemes for mean field Nash equilibria.

Every scheme alternates a policy update against the current mean field with
a mean field update induced by the new policy. They differ in how the policy is
obtained (exact best response, softmax of the optimal Q, one step of policy
evaluation, accumulated Q) and in how mean fields are averaged across
iterations.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .core import (
    Distribution,
    FiniteMfgModel,
    MeanFieldFlow,
    StationaryPolicy,
    TimePolicy,
    average_policy_tables,
    mix_arrays,
)
from .mdp import (
    ARGMAX,
    PolicyExtraction,
    backward_optimal_tables,
    backward_policy_tables,
    extract_table,
    policy_evaluation,
    softmax_table,
    value_iteration,
)
from .meanfield import flow_array, stationary_distribution
from .metrics import entropy, exploitability_report, flow_wasserstein, wasserstein

# Benchmark order of the seven schemes.
SCHEMES = (
    "fixed_point",
    "fictitious_play",
    "omd",
    "damped_fixed_point",
    "softmax_fixed_point",
    "softmax_fictitious_play",
    "boltzmann_policy_iteration",
)
EXTRA_SCHEMES = ("policy_iteration",)
MODES = ("finite_horizon", "stationary")


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "fictitious_play"
    iterations: int = 200
    damping: float = 0.5
    temperature: float = 1.0
    omd_rate: float = 0.05
    mode: str = "finite_horizon"
    report_average_policy: bool = True
    track_wasserstein: bool = True
    keep_history: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES + EXTRA_SCHEMES:
            raise ValueError(
                f"unknown scheme {self.scheme!r}; valid: {', '.join(SCHEMES + EXTRA_SCHEMES)}"
            )
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not self.omd_rate >= 0:
            raise ValueError("omd_rate must be non-negative")

    @property
    def extraction(self) -> PolicyExtraction:
        if self.scheme in ("softmax_fixed_point", "softmax_fictitious_play",
                           "boltzmann_policy_iteration", "omd"):
            return PolicyExtraction("softmax", self.temperature)
        return ARGMAX

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    exploitability: float
    step_wasserstein: float
    terminal_entropy: float
    wall_time: float


@dataclass
class IterationLog:
    records: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        if record.exploitability < -1e-6:
            raise ValueError(f"negative exploitability {record.exploitability}")
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def exploitability(self) -> np.ndarray:
        return self.column("exploitability")

    @property
    def converged(self) -> bool:
        return not self.flags

    def __len__(self) -> int:
        return len(self.records)


class SolveResult(NamedTuple):
    policy: Union[TimePolicy, StationaryPolicy]
    mean_field: Union[MeanFieldFlow, Distribution]
    log: IterationLog


class _FiniteHorizon:
    def __init__(self, model: FiniteMfgModel):
        model.require_finite_horizon()
        self.model = model
        self.m0 = np.asarray(model.initial_distribution)
        self.dist = model.state_space.graph_distance

    def uniform_policy(self):
        m = self.model
        return np.full((m.horizon + 1, m.n_states, m.n_actions), 1.0 / m.n_actions)

    def optimal_q(self, mu, flags):
        return backward_optimal_tables(mu, self.model)

    def policy_q(self, pi, mu, flags):
        return backward_policy_tables(mu, pi, self.model)

    def mean_field(self, pi, flags):
        return flow_array(self.m0, pi, self.model)

    def report(self, pi):
        return exploitability_report(TimePolicy(pi), self.model)

    def distance(self, a, b):
        return flow_wasserstein(a, b, self.dist)

    @staticmethod
    def terminal(mu):
        return mu[-1]

    @staticmethod
    def wrap(pi, mu):
        return TimePolicy(pi), MeanFieldFlow(mu)


class _Stationary:
    def __init__(self, model: FiniteMfgModel):
        self.model = model
        self.dist = model.state_space.graph_distance

    def uniform_policy(self):
        m = self.model
        return np.full((m.n_states, m.n_actions), 1.0 / m.n_actions)

    def optimal_q(self, mu, flags):
        q, info = value_iteration(Distribution(mu), self.model)
        if not info.converged:
            flags.append("value_iteration truncated")
        return np.asarray(q.table)

    def policy_q(self, pi, mu, flags):
        q, info = policy_evaluation(StationaryPolicy(pi), Distribution(mu), self.model)
        if not info.converged:
            flags.append("policy_evaluation truncated")
        return np.asarray(q.table)

    def mean_field(self, pi, flags):
        mu, info = stationary_distribution(StationaryPolicy(pi), self.model)
        if not info.converged:
            flags.append("stationary_distribution truncated")
        return np.asarray(mu)

    def report(self, pi):
        return exploitability_report(StationaryPolicy(pi), self.model)

    def distance(self, a, b):
        return wasserstein(a, b, self.dist)

    @staticmethod
    def terminal(mu):
        return mu

    @staticmethod
    def wrap(pi, mu):
        return StationaryPolicy(pi), Distribution(mu)


BestResponseFn = Callable[[np.ndarray, int], np.ndarray]


def run_scheme(
    model: FiniteMfgModel,
    cfg: SolverConfig,
    best_response_q: Optional[BestResponseFn] = None,
    callback: Optional[Callable] = None,
) -> SolveResult:
    """Run ``cfg.iterations`` iterations of ``cfg.scheme``.

    ``best_response_q(mean_field, iteration)`` may replace the exact optimal Q
    computation (used by the sample-based variants); the logged exploitability
    is always exact. ``callback(iteration, reported_policy, mean_field)`` is
    called after every iteration.
    """
    mode = _FiniteHorizon(model) if cfg.mode == "finite_horizon" else _Stationary(model)
    log = IterationLog()
    scheme = cfg.scheme
    how = cfg.extraction
    fictitious = scheme in ("fictitious_play", "softmax_fictitious_play")
    averaging = fictitious or scheme == "damped_fixed_point"
    evaluation_based = scheme in ("omd", "boltzmann_policy_iteration", "policy_iteration")

    def optimal_q(mu, ell):
        if best_response_q is not None:
            return best_response_q(mu, ell)
        return mode.optimal_q(mu, flags)

    flags: list = []
    pi = mode.uniform_policy()
    mu = mode.mean_field(pi, flags)
    mu_avg = mu
    weighted = mu[..., None] * pi
    q_cum = np.zeros_like(pi)
    previous = mu
    start = time.perf_counter()

    for ell in range(cfg.iterations):
        if evaluation_based:
            q = mode.policy_q(pi, mu, flags)
            if scheme == "omd":
                q_cum = q_cum + cfg.omd_rate * q
                pi = softmax_table(q_cum, cfg.temperature)
            else:
                pi = extract_table(q, how if scheme != "policy_iteration" else ARGMAX)
            mu = mode.mean_field(pi, flags)
            reported = pi
        else:
            q = optimal_q(mu_avg if averaging else mu, ell)
            pi = extract_table(q, how)
            mu = mode.mean_field(pi, flags)
            if averaging:
                rate = cfg.damping if scheme == "damped_fixed_point" else 1.0 / (ell + 1)
                mu_avg = mix_arrays(mu_avg, mu, rate)
                # state-action mass of the mixture; divided by mu_avg it gives
                # the policy that generates mu_avg
                fresh = mu[..., None] * pi
                weighted = fresh if rate == 1.0 else (1.0 - rate) * weighted + rate * fresh
                if fictitious and cfg.report_average_policy:
                    reported = average_policy_tables(weighted, mu_avg)
                else:
                    reported = pi
            else:
                reported = pi

        report = mode.report(reported)
        if not report.convergence.converged:
            flags.append("exploitability inner solver truncated")
        step_w = mode.distance(previous, report.mean_field) if cfg.track_wasserstein else float("nan")
        previous = report.mean_field
        log.append(
            IterationRecord(
                iteration=ell + 1,
                exploitability=report.value,
                step_wasserstein=step_w,
                terminal_entropy=entropy(mode.terminal(report.mean_field)),
                wall_time=time.perf_counter() - start,
            )
        )
        if flags:
            log.flags.extend(f"iteration {ell + 1}: {f}" for f in flags)
            flags.clear()
        if callback is not None:
            callback(ell + 1, reported, report.mean_field)
        if cfg.keep_history:
            log.history.append(
                {"policy": pi, "mu": mu, "mu_avg": mu_avg, "q_cum": q_cum, "reported": reported}
            )

    policy, mean_field = mode.wrap(reported, report.mean_field)
    return SolveResult(policy, mean_field, log)


def _require(cfg: SolverConfig, allowed) -> None:
    if cfg.scheme not in allowed:
        raise ValueError(f"scheme {cfg.scheme!r} not handled here; expected one of {allowed}")


def solve_fixed_point(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    _require(cfg, ("fixed_point",))
    return run_scheme(model, cfg)


def solve_damped_fixed_point(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    _require(cfg, ("damped_fixed_point",))
    return run_scheme(model, cfg)


def solve_fictitious_play(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    _require(cfg, ("fictitious_play",))
    return run_scheme(model, cfg)


def solve_omd(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    _require(cfg, ("omd",))
    return run_scheme(model, cfg)


def solve_policy_iteration_mfg(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    _require(cfg, ("boltzmann_policy_iteration", "policy_iteration"))
    return run_scheme(model, cfg)


def solve_softmax_variant(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    _require(cfg, ("softmax_fixed_point", "softmax_fictitious_play"))
    return run_scheme(model, cfg)


def solve(model: FiniteMfgModel, cfg: SolverConfig) -> SolveResult:
    return run_scheme(model, cfg)
