"""Entropy decay for nonlocal-in-time Fokker-Planck equations: kernels,
convolution weights, relaxation functions, a conservative 1-D solver and
a spectral reference for the Ornstein-Uhlenbeck case."""

from .convq import BACKEND, TimeGrid, build_weights, solve_relaxation
from .entropy import Logarithmic, PowerBeta
from .kernels import DistributedOrder, Fractional, MultiTerm, TemperedFractional
from .specfun import mittag_leffler

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "TimeGrid",
    "build_weights",
    "solve_relaxation",
    "Logarithmic",
    "PowerBeta",
    "DistributedOrder",
    "Fractional",
    "MultiTerm",
    "TemperedFractional",
    "mittag_leffler",
]
