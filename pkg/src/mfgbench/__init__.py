"""Finite-state mean field games: models, equilibrium solvers, tabular
reinforcement learning, mean field control and convergence metrics."""

__version__ = "0.1.0"
