"""Stochastic LQ control with multiplicative noise: Riccati solvers, cell
problem, static optimum, coupled Monte Carlo and turnpike certificates."""

from ._lqtp import *  # noqa: F401,F403
from ._lqtp import __doc__  # noqa: F401

__version__ = "0.1.0"
