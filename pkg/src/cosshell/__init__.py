"""Discrete energy minimization for single-director Cosserat shells.

Modules
-------
kinematics      minors of ``[F^T | G^T]``, orientation ``J``, area ratio, rotations
energy          polyconvex reference density, membrane density, barrier
discretization  bilinear quads, four constraint modes, assembled energy and gradient
solver          feasibility-preserving L-BFGS
convexity       joint-convexity, rank-one and blow-up probes
experiments     scenario runs, refinement studies, file outputs
"""
from ._backend import BACKEND
from .config import ScenarioConfig, load_config, parse_config
from .convexity import (blowup_scan, check_joint_convexity, find_rank_one_violation,
                        membrane_energy, planar_membrane_energy)
from .discretization import (ConstraintMode, DiscreteEnergy, FieldState, Mesh, Problem,
                             assemble_energy, assemble_gradient, build_grid,
                             constraint_residuals, evaluate_kinematics, nodal_normals,
                             prolongate)
from .energy import (DensityEval, EnergyParams, LoadSpec, barrier, membrane_density,
                     objectivity_check, phi_membrane_planar, phi_reference, reference_density)
from .errors import (ConfigError, CosshellError, DegenerateStateError, InfeasibleStateError,
                     InvalidInputError)
from .kinematics import area_ratio, is_rotation, minors, orientation_J, random_rotation, rotate
from .solver import Solution, SolverOptions, minimize, project_unit_director

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ScenarioConfig", "load_config", "parse_config",
    "blowup_scan", "check_joint_convexity", "find_rank_one_violation",
    "membrane_energy", "planar_membrane_energy",
    "ConstraintMode", "DiscreteEnergy", "FieldState", "Mesh", "Problem",
    "assemble_energy", "assemble_gradient", "build_grid", "constraint_residuals",
    "evaluate_kinematics", "nodal_normals", "prolongate",
    "DensityEval", "EnergyParams", "LoadSpec", "barrier", "membrane_density",
    "objectivity_check", "phi_membrane_planar", "phi_reference", "reference_density",
    "ConfigError", "CosshellError", "DegenerateStateError", "InfeasibleStateError",
    "InvalidInputError",
    "area_ratio", "is_rotation", "minors", "orientation_J", "random_rotation", "rotate",
    "Solution", "SolverOptions", "minimize", "project_unit_director",
]
