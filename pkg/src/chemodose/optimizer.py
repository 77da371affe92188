"""Projected-gradient descent over the control with a treatment-time scan.

Each outer iteration: price every candidate treatment-time node from the
current trajectory and keep the argmin (ties to the smallest index), solve
the costate at that node, then take an Armijo-backtracked projected step
in the control. Switching tau to the argmin never increases the
objective, and the line search only accepts decreases, so the recorded
objective history is nonincreasing by construction.

Termination requires both first-order conditions: the projected-gradient
stationarity residual in u below tolerance, and the tau-derivative sign
condition for the node's position (interior, left or right boundary).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .objective import (FoncReport, ObjectiveSpec, default_tau_tol, eval_Jr_terms_nodes,
                        fonc_residuals)
from .state import DEFAULT_S_STAB, ProblemData, StateTrajectory, solve_state
from .timegrid import Control, control_axpy, control_inner, project_admissible

ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
ARMIJO_MAX_SHRINKS = 30


@dataclass(frozen=True)
class OptimizerConfig:
    max_outer_iters: int = 50
    stationarity_tol: float = 1e-4
    tau_tol: float | None = None       # None: 1e-3 * (betaT + 1)
    armijo_init_step: float = 1.0
    armijo_max_step: float = 1e8
    include_control_term: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.stationarity_tol <= 0 or self.armijo_init_step <= 0:
            raise ValueError("tolerances and steps must be positive")


@dataclass(frozen=True)
class IterationRecord:
    outer: int
    J: float
    tau_index: int
    stationarity_u: float
    dtau_value: float
    step: float
    armijo_shrinks: int
    terms: dict


@dataclass(frozen=True)
class OptimizationResult:
    """Final iterate, its trajectory and certificates."""

    u: Control
    tau_index: int
    J: float
    status: str                       # converged | max-iters | stalled
    fonc: FoncReport
    trajectory: StateTrajectory = field(repr=False)
    J_history: tuple = ()
    iterations: tuple = field(repr=False, default=())


def _scan_tau(traj: StateTrajectory, u: Control, obj: ObjectiveSpec):
    terms = eval_Jr_terms_nodes(traj, u, obj)
    total = terms["total"]
    tau = int(np.argmin(total))      # argmin takes the first minimizer
    return tau, float(total[tau]), terms


def armijo_step(data: ProblemData, u: Control, g: Control, J_current: float,
                obj: ObjectiveSpec, tau_index: int, step0: float,
                s_stab: float = DEFAULT_S_STAB):
    """Backtracking projected-gradient step at fixed treatment time.

    Tries u(s) = proj(u - s g), halving s until
        J(u(s)) <= J_current - (slope / s) * ||u(s) - u||^2
    or the shrink budget runs out. The decrease is measured against the
    projected displacement, not s||g||^2, so components pinned at the box
    never demand decrease they cannot deliver. Returns
    (u_new, trajectory, J_new, accepted_step, n_shrinks, accepted).
    """
    s = step0
    for shrink in range(ARMIJO_MAX_SHRINKS + 1):
        trial = project_admissible(control_axpy(u, -s, g))
        move = control_axpy(trial, -1.0, u)
        move_sq = control_inner(move, move)
        if move_sq == 0.0:
            break                      # gradient points outward everywhere
        traj = solve_state(data, trial, u.timegrid, s_stab=s_stab)
        terms = eval_Jr_terms_nodes(traj, trial, obj)
        J_trial = float(terms["total"][tau_index])
        if J_trial <= J_current - (ARMIJO_SLOPE / s) * move_sq:
            return trial, traj, J_trial, s, shrink, True
        s *= ARMIJO_SHRINK
    return u, None, J_current, s, ARMIJO_MAX_SHRINKS, False


def optimize(data: ProblemData, u0: Control, obj: ObjectiveSpec,
             cfg: OptimizerConfig = OptimizerConfig(),
             s_stab: float = DEFAULT_S_STAB) -> OptimizationResult:
    tau_tol = cfg.tau_tol if cfg.tau_tol is not None else default_tau_tol(obj)
    u = project_admissible(u0)
    traj = solve_state(data, u, u.timegrid, s_stab=s_stab)
    tau, J, terms = _scan_tau(traj, u, obj)
    history = [J]
    records = []
    status = "max-iters"
    fonc = None
    step0 = cfg.armijo_init_step

    for outer in range(1, cfg.max_outer_iters + 1):
        adj = solve_adjoint(traj, data, u, obj, tau)
        fonc = fonc_residuals(traj, adj, u, data, obj, tau,
                              stationarity_tol=cfg.stationarity_tol, tau_tol=tau_tol,
                              include_control_term=cfg.include_control_term)
        if fonc.satisfied:
            status = "converged"
            records.append(IterationRecord(outer, J, tau, fonc.stationarity_u,
                                           fonc.dtau_value, 0.0, 0,
                                           {k: float(v[tau]) for k, v in terms.items()}))
            break

        u_new, traj_new, J_new, s_used, shrinks, accepted = armijo_step(
            data, u, fonc.gradient, J, obj, tau, step0, s_stab=s_stab)
        if not accepted:
            status = "stalled"
            records.append(IterationRecord(outer, J, tau, fonc.stationarity_u,
                                           fonc.dtau_value, s_used, shrinks,
                                           {k: float(v[tau]) for k, v in terms.items()}))
            break

        u, traj = u_new, traj_new
        tau, J, terms = _scan_tau(traj, u, obj)   # rescan on the new trajectory
        history.append(J)
        records.append(IterationRecord(outer, J, tau, fonc.stationarity_u,
                                       fonc.dtau_value, s_used, shrinks,
                                       {k: float(v[tau]) for k, v in terms.items()}))
        step0 = min(2.0 * s_used, cfg.armijo_max_step)

    if status == "max-iters" or fonc.tau_index != tau:
        # certify the final iterate against the final trajectory
        adj = solve_adjoint(traj, data, u, obj, tau)
        fonc = fonc_residuals(traj, adj, u, data, obj, tau,
                              stationarity_tol=cfg.stationarity_tol, tau_tol=tau_tol,
                              include_control_term=cfg.include_control_term)
        if status == "max-iters" and fonc.satisfied:
            status = "converged"

    return OptimizationResult(u, tau, J, status, fonc, traj,
                              tuple(history), tuple(records))
