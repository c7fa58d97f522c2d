"""Numerical laboratory for p-Laplacian and porous-medium reaction-diffusion
problems on Euclidean and hyperbolic model manifolds."""

from . import config, dynamics, exponents, geometry, harness
from .dynamics import Datum, RadialState, RunConfig, RunRecord, run, s_monitor, step
from .exponents import ProblemParams
from .geometry import ManifoldSpec, RadialGrid, lq_norm

__all__ = [
    "config", "dynamics", "exponents", "geometry", "harness",
    "Datum", "ManifoldSpec", "ProblemParams", "RadialGrid", "RadialState",
    "RunConfig", "RunRecord", "lq_norm", "run", "s_monitor", "step",
]

__version__ = "0.1.0"
