"""Perturbative branch of charged Dirac solitons coupled to gravity, computed
by continuation from the Choquard ground state."""

from .choquard import (DomainError, GroundState, ModelParams, WrongBranchError,
                       check_nondegeneracy, rescale_to_model, solve_canonical_ground_state,
                       solve_ground_state)
from .continuation import Branch, BranchPoint, SolverOptions, continue_branch, newton_correct
from .edm_system import alpha, jacobian, scaled_residual, sigma_min
from .grid import RadialField, RadialGrid, build_grid
from .limit_state import ScaledState, assemble_limit_state
from .newton import MetricBreakdownError, SolverError
from .physical import PhysicalSolution, diagnostics, reconstruct, unscaled_residual

__version__ = "0.1.0"

__all__ = [
    "Branch", "BranchPoint", "DomainError", "GroundState", "MetricBreakdownError",
    "ModelParams", "PhysicalSolution", "RadialField", "RadialGrid", "ScaledState",
    "SolverError", "SolverOptions", "WrongBranchError", "alpha", "assemble_limit_state",
    "build_grid", "check_nondegeneracy", "continue_branch", "diagnostics", "jacobian",
    "newton_correct", "reconstruct", "rescale_to_model", "scaled_residual", "sigma_min",
    "solve_canonical_ground_state", "solve_ground_state", "unscaled_residual",
]
