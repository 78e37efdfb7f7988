"""Two-line telegraph process with a transmit/reflect/kill interface and its diffusion limits."""

from .model import (
    Grid,
    InterfaceParams,
    LineDensity,
    ParameterError,
    ScaledModel,
    TwoLineDensity,
    flip_exact,
    l1_distance,
    project_P,
    total_mass,
    validate,
)
from .kinetic import simulate_ensemble, simulate_particle
from .transport import SolverConfig, evolve_G_epsilon
from .kernels import SkewParams, gamma_minus, gamma_plus, minimal_density_evolve, skew_density_evolve

__all__ = [
    "Grid",
    "InterfaceParams",
    "LineDensity",
    "ParameterError",
    "ScaledModel",
    "SkewParams",
    "SolverConfig",
    "TwoLineDensity",
    "evolve_G_epsilon",
    "flip_exact",
    "gamma_minus",
    "gamma_plus",
    "l1_distance",
    "minimal_density_evolve",
    "project_P",
    "simulate_ensemble",
    "simulate_particle",
    "skew_density_evolve",
    "total_mass",
    "validate",
]
