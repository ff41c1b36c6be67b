"""Moment growth and front speeds of the stochastic heat and wave equations.

Modules
-------
levy       Levy exponents, Dalang integral, transition densities
kernels    heat / wave kernel specs and their weighted norms
bounds     closed-form thresholds and growth-index intervals
oracle     exact second-moment (renewal) solver for linear noise
simulate   Monte Carlo path schemes and ensembles
estimate   moment fields, Lyapunov exponents and growth indices
cli        command-line driver
"""

__version__ = "0.1.0"

from .bounds import Linear, SaturatingLinear  # noqa: E402
from .estimate import GrowthIndexReport, MomentField, growth_index_estimate  # noqa: E402
from .grid import Grid  # noqa: E402
from .kernels import Heat, Wave  # noqa: E402
from .levy import Brownian, TruncatedStable  # noqa: E402
from .oracle import RenewalProblem, solve_second_moment  # noqa: E402
from .profiles import Bump, ExpDecay, Flat, InitialData, Zero  # noqa: E402
from .simulate import SimConfig, simulate_ensemble  # noqa: E402

__all__ = [
    "Brownian", "TruncatedStable", "Heat", "Wave", "Linear", "SaturatingLinear",
    "Flat", "Bump", "ExpDecay", "Zero", "InitialData", "Grid",
    "RenewalProblem", "solve_second_moment", "SimConfig", "simulate_ensemble",
    "MomentField", "GrowthIndexReport", "growth_index_estimate",
]
