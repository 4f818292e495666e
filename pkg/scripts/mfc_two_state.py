"""Social optimum of a two-state crowd game by dynamic programming on the
simplex, compared with the fictitious play equilibrium."""

import argparse

import numpy as np

from mfgbench.envs import TwoStateParams, build_two_state_game
from mfgbench.equilibrium import SolverConfig, solve
from mfgbench.mfc import SimplexGrid, price_of_anarchy, social_welfare, solve_mfc_grid

parser = argparse.ArgumentParser()
parser.add_argument("--mesh", type=int, default=50)
parser.add_argument("--action-mesh", type=int, default=20)
parser.add_argument("--horizon", type=int, default=3)
args = parser.parse_args()

params = TwoStateParams(crowd=1.0, bonus=(1.0, 0.2), move_cost=0.05, horizon=args.horizon)
model = build_two_state_game(params)
solution = solve_mfc_grid(model, SimplexGrid(args.mesh, 2), args.action_mesh)
eq = solve(model, SolverConfig(scheme="fictitious_play", iterations=500)).policy

print("grid value        %.6f" % solution.value)
print("greedy welfare    %.6f" % social_welfare(solution.greedy_policy(model), model))
print("equilibrium welfare %.6f" % social_welfare(eq, model))
poa = price_of_anarchy(model, eq, solution.value)
print("price of anarchy  %.6f (%s)" % poa)
