"""Q-learning best response against the uniform flow on four rooms, compared
with backward induction on the states the learner starts from."""

import argparse
import time

import numpy as np

from mfgbench.core import TimePolicy
from mfgbench.envs import build_four_rooms
from mfgbench.mdp import backward_optimal_tables
from mfgbench.meanfield import flow_array
from mfgbench.rl_tabular import FrozenMeanFieldEnv, QLearningConfig, q_learning_tables

parser = argparse.ArgumentParser()
parser.add_argument("--episodes", type=int, default=200_000)
parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
args = parser.parse_args()

model = build_four_rooms()
uniform = np.asarray(TimePolicy.uniform(model.horizon, model.n_states, model.n_actions))
flow = flow_array(np.asarray(model.initial_distribution), uniform, model)
q_star = backward_optimal_tables(flow, model)[0]
support = np.asarray(model.initial_distribution) > 0
env = FrozenMeanFieldEnv(model, flow)
for seed in args.seeds:
    t = time.perf_counter()
    q, _ = q_learning_tables(env, QLearningConfig(episodes=args.episodes, seed=seed))
    err = np.abs(q[0][support] - q_star[support]).max() / np.abs(q_star[support]).max()
    print(f"seed {seed}: relative error {err:.4f} ({time.perf_counter() - t:.1f}s)")
