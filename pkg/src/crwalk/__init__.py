"""Controlled random walks in a random potential: free energies, correctors,
Bellman values and effective Hamiltonians."""
from .env import Environment, make_environment, parse_env_spec
from .tfe import free_energy, solve_lambda

__version__ = "0.1.0"
__all__ = ["Environment", "make_environment", "parse_env_spec", "free_energy", "solve_lambda"]
