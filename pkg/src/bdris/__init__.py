"""Mutual-coupling-aware modeling and optimization of BD-RIS aided radio links."""

from .architecture import (RisArchitecture, SymmetryMap, TunableImpedance,
                           assemble_block_diagonal, build_symmetry_map,
                           expand_increment, init_no_mc, make_architecture,
                           validate_impedance)
from .errors import (AssumptionViolation, ConfigError, CostGuardExceeded,
                     DimensionMismatch, InvalidArchitecture, InvalidGeometry,
                     NeumannConditionWarning, NonMonotoneGain,
                     QuadratureNotConverged, RisError, SingularMatrixError,
                     ThetaNearIdentity)
from .network import (ChannelTerms, ImpedanceParams, ScatteringParams,
                      channel_gain, channel_general, channel_impedance,
                      channel_scattering, impedance_from_theta,
                      reflection_matrix, s_blocks_from_z_blocks, s_from_z,
                      theta_from_impedance)
from .optimizer import (OptimizationResult, OptimizerConfig, OptimizerState,
                        apply_update, compute_linearization, optimize,
                        oracle_search, solve_increment)
from .scenario import (Dipole, DerivedConstants, ScenarioConfig, build_scenario,
                       decouple, load_or_build, mutual_impedance, place_ris_grid)

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "ChannelTerms", "ConfigError", "CostGuardExceeded",
    "DerivedConstants", "DimensionMismatch", "Dipole", "ImpedanceParams",
    "InvalidArchitecture", "InvalidGeometry", "NeumannConditionWarning",
    "NonMonotoneGain", "OptimizationResult", "OptimizerConfig", "OptimizerState",
    "QuadratureNotConverged", "RisArchitecture", "RisError", "ScatteringParams",
    "ScenarioConfig", "SingularMatrixError", "SymmetryMap", "ThetaNearIdentity",
    "TunableImpedance", "apply_update", "assemble_block_diagonal",
    "build_scenario", "build_symmetry_map", "channel_gain", "channel_general",
    "channel_impedance", "channel_scattering", "compute_linearization",
    "decouple", "expand_increment", "impedance_from_theta", "init_no_mc",
    "load_or_build", "make_architecture", "mutual_impedance", "optimize",
    "oracle_search", "place_ris_grid", "reflection_matrix",
    "s_blocks_from_z_blocks", "s_from_z", "solve_increment",
    "theta_from_impedance", "validate_impedance",
]
