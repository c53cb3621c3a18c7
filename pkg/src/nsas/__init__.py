"""Spectral simulation and decay analysis for the isentropic compressible
Navier-Stokes system on mixed periodic/open domains T^ell x R^(3-ell).

The package covers the full pipeline: exact linear-symbol analysis and
semigroup propagation, ETD time stepping of the nonlinear system, reduced
profile dynamics on the open factor, and decay-rate measurement with
configurable pass/fail experiments.
"""

__version__ = "0.1.0"

from .diagnostics import (DecayFit, DecaySeries, ProfileComparison,
                          RunRecorder, SeriesWriter, SupFunctionalTracker,
                          compare_to_average, compare_to_profile, fit_decay,
                          read_series_csv)
from .domain import DomainSpec, FluidParams, Grid, PressureLaw, params_from_law
from .errors import (AlignmentError, ConfigError, DataError, DivergenceError,
                     NsasError, ParameterError, ShapeError, StabilityError,
                     StateError)
from .experiments import ExperimentReport, run_experiment
from .profile import (EnergyTracker, ProfileState, energy_N, profile_rhs,
                      profile_run)
from .semigroup import SemigroupSampler, frequency_split, propagator
from .solver import EtdStepper, SolverConfig, make_initial_data, run, stability_limit
from .spectral import (derivative_l2, embed_coefficients, forward_transform,
                       inverse_transform, lebesgue_norm, sobolev_norm)
from .state import StateField, read_checkpoint, write_checkpoint
from .symbol import (admissible_r0_window, half_gap, perturbed_gap,
                     spectral_gap, symbol_eigenvalues)
from .config import ExperimentConfig, load_config, parse_config

__all__ = [
    "__version__",
    # domain / parameters
    "DomainSpec", "FluidParams", "Grid", "PressureLaw", "params_from_law",
    # state and storage
    "StateField", "read_checkpoint", "write_checkpoint",
    # transforms and norms
    "forward_transform", "inverse_transform", "lebesgue_norm",
    "sobolev_norm", "derivative_l2", "embed_coefficients",
    # linear theory
    "symbol_eigenvalues", "spectral_gap", "half_gap", "admissible_r0_window",
    "perturbed_gap", "propagator", "SemigroupSampler", "frequency_split",
    # nonlinear solver
    "EtdStepper", "SolverConfig", "run", "stability_limit", "make_initial_data",
    # profile systems
    "ProfileState", "profile_rhs", "profile_run", "EnergyTracker", "energy_N",
    # diagnostics
    "DecaySeries", "DecayFit", "fit_decay", "compare_to_average",
    "compare_to_profile", "ProfileComparison", "SupFunctionalTracker",
    "SeriesWriter", "RunRecorder", "read_series_csv",
    # experiments and config
    "ExperimentConfig", "load_config", "parse_config",
    "ExperimentReport", "run_experiment",
    # errors
    "NsasError", "ShapeError", "ParameterError", "StateError",
    "StabilityError", "AlignmentError", "DataError", "ConfigError",
    "DivergenceError",
]
