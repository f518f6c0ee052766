"""Defect-formation free energy of a one-dimensional atomistic chain.

Three routes to the same observable: direct stochastic sampling of the
finite chain, a coarse-grained surrogate that relaxes the far field
exactly, and the closed thermodynamic-limit value. The public API is
re-exported here; see the module docstrings for the mathematics.
"""

__version__ = "0.1.0"

from .cauchy_born import CauchyBornEvaluator, StrainEnergy, TabulatedStrainEnergy, TiltedStats
from .cli import ConvergenceReport, RunConfig, SlopeFit, fit_slope, load_config, run
from .coarse_grain import (
    ChainSpec,
    RelaxationResult,
    cg_exterior_energy,
    cg_free_energy,
    limit_exterior_energy,
    limit_free_energy,
    relax_exterior,
)
from .errors import ConfigError, DefectFEError, NumericalError, QuadratureError, SolverError
from .oracles import (
    HarmonicParams,
    coarsened_free_energy,
    coarsening_coefficients,
    dense_free_energy,
    harmonic_free_energy,
    harmonic_limit_free_energy,
)
from .potentials import (
    AssumptionReport,
    DefectSpec,
    ForceSequence,
    Potential,
    add_potentials,
    build_force_sequence,
    check_assumptions,
    make_potential,
)
from .quadrature import QuadratureConfig, log_integral_exp, weighted_mean
from .sampler import (
    FreeEnergyEstimate,
    MalaConfig,
    chain_energy_and_gradient,
    estimate_gn,
    mala_step,
    staged_fep,
)

__all__ = [
    "AssumptionReport",
    "CauchyBornEvaluator",
    "ChainSpec",
    "ConfigError",
    "ConvergenceReport",
    "DefectFEError",
    "DefectSpec",
    "ForceSequence",
    "FreeEnergyEstimate",
    "HarmonicParams",
    "MalaConfig",
    "NumericalError",
    "Potential",
    "QuadratureConfig",
    "QuadratureError",
    "RelaxationResult",
    "RunConfig",
    "SlopeFit",
    "SolverError",
    "StrainEnergy",
    "TabulatedStrainEnergy",
    "TiltedStats",
    "add_potentials",
    "build_force_sequence",
    "cg_exterior_energy",
    "cg_free_energy",
    "chain_energy_and_gradient",
    "check_assumptions",
    "coarsened_free_energy",
    "coarsening_coefficients",
    "dense_free_energy",
    "estimate_gn",
    "fit_slope",
    "harmonic_free_energy",
    "harmonic_limit_free_energy",
    "limit_exterior_energy",
    "limit_free_energy",
    "load_config",
    "log_integral_exp",
    "make_potential",
    "mala_step",
    "relax_exterior",
    "run",
    "staged_fep",
    "weighted_mean",
]
