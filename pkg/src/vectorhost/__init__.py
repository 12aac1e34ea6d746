"""Finite-difference toolkit for periodic vector-host epidemic models.

Simulation of the four-compartment reaction-diffusion system, periodic
orbits, principal eigenvalues and reproduction numbers, constant-case
closed forms, parameter sweeps and threshold-dynamics checks.
"""

from .analytic import ConstantParams, Regime, classify_regime, constant_case_report
from .dynamics_check import check_threshold_dynamics
from .model import (BoundaryCondition, CoefficientField, HeterogeneityParams, ModelSpec,
                    constant_spec, load_spec, parametric_spec, validate_model)
from .numerics import Numerics
from .periodic import PeriodicOrbit, find_periodic_orbit
from .solver import StateField, simulate_full, simulate_logistic, simulate_modified
from .spectral import (basic_reproduction_coupled, basic_reproduction_scalar,
                       principal_eigenvalue_coupled, principal_eigenvalue_scalar,
                       threshold_quantities)
from .sweep import SweepSpec, run_sweep

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "CoefficientField", "ConstantParams", "HeterogeneityParams",
    "ModelSpec", "Numerics", "PeriodicOrbit", "Regime", "StateField", "SweepSpec",
    "basic_reproduction_coupled", "basic_reproduction_scalar", "check_threshold_dynamics",
    "classify_regime", "constant_case_report", "constant_spec", "find_periodic_orbit",
    "load_spec", "parametric_spec", "principal_eigenvalue_coupled",
    "principal_eigenvalue_scalar", "run_sweep", "simulate_full", "simulate_logistic",
    "simulate_modified", "threshold_quantities", "validate_model",
]
