"""Spectral solver and decay diagnostics for the FENE dumbbell micro-macro model."""

from .model import Drag, FeneParams, equilibrium_density, normalization, potential
from .config_space import (ConfigDistribution, assemble_operators, build_basis, entropy, fisher_g,
                           fisher_sqrt, poincare_constant, poincare_eigenpairs, relative_l2,
                           relative_stress, stress_tensor)
from .fluid import StressField, TorusGrid, VelocityField, leray_project, nonlinear_term, stress_forcing
from .integrator import (CoupledSystem, Functionals, RunAborted, Scheme, StepperConfig, SystemState,
                         localized_velocity, perturbed_configuration)
from .trace import DecayTrace, SERIES
from .cli import ExperimentConfig, parse_config, run_experiment

__version__ = "0.1.0"
