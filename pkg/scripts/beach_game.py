"""Static beach game: fictitious play against the grid-search social optimum."""

import argparse

import numpy as np

from mfgbench.static_game import (
    beach_game,
    static_fictitious_play,
    static_social_optimum,
    static_welfare,
)

parser = argparse.ArgumentParser()
parser.add_argument("--positions", type=int, default=11)
parser.add_argument("--iters", type=int, default=500)
parser.add_argument("--grid-step", type=float, default=0.05)
args = parser.parse_args()

game = beach_game(args.positions)
xi, trace = static_fictitious_play(game, args.iters)
np.set_printoptions(precision=4, suppress=True)
print("equilibrium      ", np.asarray(xi))
print("exploitability    %.3e" % trace[-1])
print("equilibrium welfare %.6f" % static_welfare(xi, game))
if args.positions <= 6:
    opt = static_social_optimum(game, args.grid_step)
    print("grid optimum     ", np.asarray(opt))
    print("optimum welfare   %.6f" % static_welfare(opt, game))
