"""Diffuse-interface tumor growth with nutrient coupling, adjoint-based
dose gradients, and a projected-gradient treatment optimizer.

The forward model evolves a phase field phi (tissue vs host), its chemical
potential mu, and a nutrient fraction sigma under a drug dose u(x, t). The
objective prices tracking toward a target evolution and a target final
state over a relaxation window before the treatment time tau, the tissue
size in that window, the integrated squared dose, and the treatment time
itself. Gradients in u come from a backward costate sweep; the derivative
in tau is evaluated in closed form on the trajectory. Everything is
certified by the checks in chemodose.verification.
"""

from .errors import ConfigError, DivergenceError, GridMismatchError, LinearSolverError
from .grid import (Grid, ScalarField, const_field, dirichlet_form, field_from_function,
                   grad_sq_norm, h1_norm_sq, inner_product, integrate, l2_norm,
                   laplacian_neumann, restrict_to_coarse)
from .kernels import get_backend, set_backend
from .model import (DoubleWellPotential, Interpolant, ModelParams,
                    default_interpolant, default_potential)
from .timegrid import (Control, TimeGrid, const_control, control_axpy,
                       control_from_matrix, control_inner, control_norm,
                       project_admissible)
from .state import (DEFAULT_S_STAB, ProblemData, StateTrajectory, energy,
                    residual_report, solve_state, step_state)
from .linearized import LinearizedTrajectory, solve_linearized, taylor_remainder
from .adjoint import AdjointTrajectory, adjoint_source, solve_adjoint
from .objective import (FoncReport, ObjectiveSpec, default_tau_tol, dtau_J, eval_Jr,
                        eval_Jr_terms_nodes, fonc_residuals, grad_u)
from .optimizer import (OptimizationResult, OptimizerConfig, armijo_step, optimize)
from .verification import (VerificationReport, check_continuous_dependence,
                           check_dtau_fd, check_duality, check_energy_decay,
                           check_gradient_fd, check_self_convergence,
                           check_sigma_bounds, check_taylor, duality_gap,
                           pairing_aligned_direction, run_verification)
from .config import BuiltProblem, RunConfig, build_problem, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory", "BuiltProblem", "ConfigError", "Control",
    "DEFAULT_S_STAB", "DivergenceError", "DoubleWellPotential", "FoncReport",
    "Grid", "GridMismatchError", "Interpolant", "LinearSolverError",
    "LinearizedTrajectory", "ModelParams", "ObjectiveSpec",
    "OptimizationResult", "OptimizerConfig", "ProblemData", "RunConfig",
    "ScalarField", "StateTrajectory", "TimeGrid", "VerificationReport",
    "adjoint_source", "armijo_step", "build_problem",
    "check_continuous_dependence", "check_dtau_fd", "check_duality",
    "check_energy_decay", "check_gradient_fd", "check_self_convergence",
    "check_sigma_bounds", "check_taylor", "const_control", "const_field",
    "control_axpy", "control_from_matrix", "control_inner", "control_norm",
    "default_interpolant", "default_potential", "default_tau_tol",
    "dirichlet_form", "dtau_J", "duality_gap", "energy", "eval_Jr",
    "eval_Jr_terms_nodes", "field_from_function", "fonc_residuals",
    "get_backend", "grad_sq_norm", "grad_u", "h1_norm_sq", "inner_product",
    "integrate", "l2_norm", "laplacian_neumann", "load_config", "optimize",
    "pairing_aligned_direction", "parse_config", "project_admissible",
    "residual_report",
    "restrict_to_coarse", "run_verification", "set_backend", "solve_adjoint",
    "solve_linearized", "solve_state", "step_state", "taylor_remainder",
    "__version__",
]
