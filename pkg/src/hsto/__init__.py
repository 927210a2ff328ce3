"""Simulator and verification lab for the 3D stochastic hydrostatic ocean
equations: direct Ito integration, linear-stochastic/pathwise splitting, and
numerical checks of the estimates underpinning global regularity."""

__version__ = "0.1.0"

from .grid import Grid, GridSpec, State, make_grid
from .operators import PhysParams, Tendency
from .stepping import ForcingSpec, RunConfig, run_trajectory

__all__ = ["Grid", "GridSpec", "State", "make_grid", "PhysParams",
           "Tendency", "ForcingSpec", "RunConfig", "run_trajectory",
           "__version__"]
