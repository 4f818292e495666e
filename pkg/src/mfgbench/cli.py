"""Command line runner for the equilibrium benchmark.

``mfgbench run`` solves one scheme (or all seven) on a configured environment
and writes ``exploitability.csv``, distribution snapshots and ``metadata.json``
per scheme. ``mfgbench compare`` tabulates several run directories.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .envs import GridWorldSpec, TwoStateParams, build_four_rooms, build_two_state_game
from .equilibrium import EXTRA_SCHEMES, SCHEMES, SolverConfig, run_scheme
from .rl_tabular import PolynomialRate, QLearningConfig, rl_fictitious_play

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3

ENVS = ("four_rooms", "two_state")
ALGOS = SCHEMES + EXTRA_SCHEMES + ("rl_fictitious_play",)
LOG_COLUMNS = ("iter", "exploitability", "step_wasserstein", "terminal_entropy", "wall_time_s")
SUMMARY_COLUMNS = ("scheme", "dir", "iterations", "final_exploitability",
                   "min_exploitability", "terminal_entropy")

DEFAULTS = {
    "env": {"name": "four_rooms"},
    "algo": {
        "name": "fictitious_play",
        "iterations": 200,
        "damping": 0.5,
        "temperature": 1.0,
        "omd_rate": 0.05,
        "mode": "finite_horizon",
        "report_average_policy": True,
        "seed": 0,
        "q_learning": {"episodes": 20_000, "epsilon": 0.2, "rate_power": 0.8,
                       "optimistic_reward": None},
    },
    "metrics": {
        "track_wasserstein": True,
        "snapshot_every": None,
        "exploitability_tol": None,
    },
    "output": {"dir": "out", "record_wall_time": False},
}


class ConfigError(ValueError):
    pass


def _env_defaults(name: str) -> dict:
    if name == "four_rooms":
        return GridWorldSpec().to_dict()
    if name == "two_state":
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in dataclasses.asdict(TwoStateParams()).items()}
    raise ConfigError(f"unknown env {name!r}; valid envs: {', '.join(ENVS)}")


def _merge(base: dict, update: dict, where: str) -> dict:
    out = dict(base)
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown key {where}.{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{where}.{key}")
        else:
            out[key] = value
    return out


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def resolve_config(raw: dict, args: argparse.Namespace) -> dict:
    """Defaults, then the JSON file, then command line flags."""
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    raw_env = dict(raw.get("env", {}))
    env_name = args.env or raw_env.get("name", DEFAULTS["env"]["name"])
    env = {"name": env_name, **_env_defaults(env_name)}
    raw_env["name"] = env_name
    cfg = {
        "env": _merge(env, raw_env, "env"),
        "algo": _merge(DEFAULTS["algo"], raw.get("algo", {}), "algo"),
        "metrics": _merge(DEFAULTS["metrics"], raw.get("metrics", {}), "metrics"),
        "output": _merge(DEFAULTS["output"], raw.get("output", {}), "output"),
    }
    flags = {
        ("algo", "name"): args.algo,
        ("algo", "iterations"): args.iters,
        ("algo", "seed"): args.seed,
        ("algo", "temperature"): args.tau,
        ("algo", "damping"): args.alpha,
        ("algo", "omd_rate"): args.omd_rate,
        ("metrics", "snapshot_every"): args.snapshot_every,
        ("output", "dir"): args.out,
    }
    for (section, key), value in flags.items():
        if value is not None:
            cfg[section][key] = value
    name = cfg["algo"]["name"]
    if name != "all" and name not in ALGOS:
        raise ConfigError(f"unknown scheme {name!r}; valid schemes: {', '.join(ALGOS)}, all")
    every = cfg["metrics"]["snapshot_every"]
    if every is not None and (not isinstance(every, int) or every < 1):
        raise ConfigError("snapshot_every must be a positive integer")
    return cfg


def build_env(env_cfg: dict):
    params = {k: v for k, v in env_cfg.items() if k != "name"}
    try:
        if env_cfg["name"] == "four_rooms":
            params["walls"] = [tuple(w) for w in params["walls"]]
            params["start"] = [(tuple(cell), w) for cell, w in params["start"]]
            return build_four_rooms(GridWorldSpec(**params))
        params["bonus"] = tuple(params["bonus"])
        params["initial"] = tuple(params["initial"])
        return build_two_state_game(TwoStateParams(**params))
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid env config: {exc}") from exc


def solver_config(algo: dict, scheme: str, track_wasserstein: bool) -> SolverConfig:
    try:
        return SolverConfig(
            scheme="fictitious_play" if scheme == "rl_fictitious_play" else scheme,
            iterations=int(algo["iterations"]),
            damping=float(algo["damping"]),
            temperature=float(algo["temperature"]),
            omd_rate=float(algo["omd_rate"]),
            mode=algo["mode"],
            report_average_policy=bool(algo["report_average_policy"]),
            track_wasserstein=bool(track_wasserstein),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid algo config: {exc}") from exc


def snapshot_iterations(total: int, every: Optional[int]) -> set:
    if every is None:
        return {1, max(1, total // 2), total}
    return {1, total} | set(range(every, total + 1, every))


def _fmt(value: float) -> str:
    return "nan" if math.isnan(value) else repr(float(value))


def write_snapshot(directory: Path, iteration: int, mean_field, labels) -> None:
    steps = np.asarray(mean_field, dtype=float)
    if steps.ndim == 1:
        steps = steps[None, :]
    grid = labels is not None and all(isinstance(l, tuple) and len(l) == 2 for l in labels)
    for n, mu in enumerate(steps):
        with open(directory / f"dist_iter{iteration}_t{n}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if grid:
                w.writerow(("row", "col", "mass"))
                w.writerows((r, c, _fmt(m)) for (r, c), m in zip(labels, mu))
            else:
                w.writerow(("state", "mass"))
                w.writerows((i, _fmt(m)) for i, m in enumerate(mu))


def write_log(path: Path, log, record_wall_time: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in log.records:
            w.writerow((
                r.iteration,
                _fmt(r.exploitability),
                _fmt(r.step_wasserstein),
                _fmt(r.terminal_entropy),
                _fmt(r.wall_time if record_wall_time else float("nan")),
            ))


def run_one(cfg: dict, scheme: str, directory: Path) -> bool:
    """Solve one scheme into ``directory``; return True when nothing was flagged."""
    directory.mkdir(parents=True, exist_ok=True)
    model = build_env(cfg["env"])
    algo, metrics = cfg["algo"], cfg["metrics"]
    scfg = solver_config(algo, scheme, metrics["track_wasserstein"])
    wanted = snapshot_iterations(scfg.iterations, metrics["snapshot_every"])
    labels = model.state_space.labels

    def snapshot(iteration, _policy, mean_field):
        if iteration in wanted:
            write_snapshot(directory, iteration, mean_field, labels)

    if scheme == "rl_fictitious_play":
        ql = algo["q_learning"]
        try:
            qcfg = QLearningConfig(
                episodes=int(ql["episodes"]),
                epsilon=float(ql["epsilon"]),
                learning_rate=PolynomialRate(float(ql["rate_power"])),
                seed=int(algo["seed"]),
                optimistic_reward=ql["optimistic_reward"],
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid q_learning config: {exc}") from exc
        result = rl_fictitious_play(model, scfg, qcfg, callback=snapshot)
    else:
        result = run_scheme(model, scfg, callback=snapshot)

    flags = list(result.log.flags)
    tol = metrics["exploitability_tol"]
    final = float(result.log.exploitability[-1])
    if tol is not None and final > float(tol):
        flags.append(f"final exploitability {final:.6g} above tolerance {tol}")

    write_log(directory / "exploitability.csv", result.log, cfg["output"]["record_wall_time"])
    meta = {
        "version": __version__,
        "scheme": scheme,
        "config": {**cfg, "algo": {**algo, "name": scheme}},
        "solver": scfg.to_dict(),
        "n_states": model.n_states,
        "n_actions": model.n_actions,
        "snapshot_iterations": sorted(wanted),
        "final_exploitability": final,
        "flags": flags,
    }
    with open(directory / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return not flags


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = resolve_config(load_config(args.config), args)
        out = Path(cfg["output"]["dir"])
        if cfg["algo"]["name"] == "all":
            ok = True
            for scheme in SCHEMES:
                ok &= run_one(cfg, scheme, out / scheme)
                print(f"{scheme}: done", file=sys.stderr)
        else:
            ok = run_one(cfg, cfg["algo"]["name"], out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not ok and args.strict:
        print("error: solver flagged non-convergence", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def summarize(directory: Path) -> dict:
    path = directory / "exploitability.csv"
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no rows")
    scheme = directory.name
    meta = directory / "metadata.json"
    if meta.is_file():
        scheme = json.loads(meta.read_text()).get("scheme", scheme)
    expl = [float(r["exploitability"]) for r in rows]
    return {
        "scheme": scheme,
        "dir": str(directory),
        "iterations": len(rows),
        "final_exploitability": expl[-1],
        "min_exploitability": min(expl),
        "terminal_entropy": float(rows[-1]["terminal_entropy"]),
    }


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        rows = [summarize(Path(d)) for d in args.dirs]
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r["scheme"], r["dir"], r["iterations"], _fmt(r["final_exploitability"]),
                        _fmt(r["min_exploitability"]), _fmt(r["terminal_entropy"])])
    width = max(len(r["scheme"]) for r in rows)
    print(f"{'scheme':<{width}}  {'final':>12}  {'min':>12}  {'entropy':>9}")
    for r in rows:
        print(f"{r['scheme']:<{width}}  {r['final_exploitability']:12.6g}  "
              f"{r['min_exploitability']:12.6g}  {r['terminal_entropy']:9.5f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfgbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one scheme or all seven")
    run.add_argument("--config", metavar="PATH")
    run.add_argument("--env", metavar="NAME")
    run.add_argument("--algo", metavar="NAME|all")
    run.add_argument("--iters", type=int, metavar="N")
    run.add_argument("--seed", type=int, metavar="N")
    run.add_argument("--out", metavar="DIR")
    run.add_argument("--strict", action="store_true",
                     help="exit 3 if the solver flags non-convergence")
    run.add_argument("--tau", type=float, metavar="R", help="softmax temperature")
    run.add_argument("--alpha", type=float, metavar="R", help="damping of the damped fixed point")
    run.add_argument("--omd-rate", type=float, metavar="R")
    run.add_argument("--snapshot-every", type=int, metavar="N")
    run.set_defaults(func=cmd_run)

    compare = sub.add_parser("compare", help="tabulate run directories")
    compare.add_argument("dirs", nargs="+", metavar="DIR")
    compare.add_argument("--out", default=".", metavar="DIR", help="where summary.csv goes")
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
