"""Linearization of the state system around a solved trajectory.

The stepping below is the exact derivative of one forward step with the
same operator freezes, so the map w -> (Phi, Sigma) is the exact tangent
of the discrete solve. That is what makes the Taylor remainder of the
forward map decay at second order all the way down to solver tolerance.

Per step n -> n+1, with base fields (phi^n, sigma^{n+1}, u^n) and
direction w:

    (I + dt(-Lap + Ccal h(phi^n) + Bcal)) Sigma^{n+1}
        = Sigma^n - dt Ccal h'(phi^n) Phi^n sigma^{n+1}

    (I + dt A s_stab (-Lap) + dt B Lap^2) Phi^{n+1}
        = Phi^n + dt Lap[ A (psi''(phi^n) - s_stab) Phi^n ]
          + dt [ h'(phi^n) Phi^n g^n + h(phi^n) (P Sigma^{n+1} - alpha w^n) ],
    g^n = P sigma^{n+1} - Acal - alpha u^n

    Xi^{n+1} = A (psi''(phi^n) Phi^n + s_stab (Phi^{n+1} - Phi^n)) - B Lap Phi^{n+1}

with Phi^0 = Sigma^0 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DivergenceError, GridMismatchError
from .grid import Grid, ScalarField, check_same_grid, l2_norm
from .state import (CG_TOL, DEFAULT_S_STAB, ProblemData, StateTrajectory,
                    check_solver_result,
                    _maxiter, solve_state)
from .timegrid import Control, TimeGrid, control_axpy


@dataclass(frozen=True)
class LinearizedTrajectory:
    """Tangent fields (Phi, Xi, Sigma) at every node of the base grid."""

    grid: Grid
    timegrid: TimeGrid
    phi: tuple = field(repr=False)
    xi: tuple = field(repr=False)
    sigma: tuple = field(repr=False)

    def __post_init__(self):
        n = self.timegrid.n_nodes
        if not (len(self.phi) == len(self.xi) == len(self.sigma) == n):
            raise GridMismatchError("trajectory length does not match the time grid")


def solve_linearized(base: StateTrajectory, data: ProblemData, u: Control,
                     w: Control, s_stab: float = DEFAULT_S_STAB,
                     cg_tol: float = CG_TOL) -> LinearizedTrajectory:
    """Tangent solve along direction w around the base trajectory."""
    grid = check_same_grid(base.phi[0], data.phi0, w.frames[0])
    if base.timegrid != w.timegrid or base.timegrid != u.timegrid:
        raise GridMismatchError("base, control and direction time grids differ")
    tg = base.timegrid
    dt = tg.dt
    meta = grid.kernel_meta
    maxiter = _maxiter(grid)
    prm = data.params
    zeros = np.zeros(grid.n_cells)

    cap_phi = [ScalarField(grid, zeros)]
    cap_xi = [ScalarField(grid, zeros)]
    cap_sig = [ScalarField(grid, zeros)]
    Phi = zeros
    Sig = zeros
    for k in range(tg.n_steps):
        phik = base.phi[k].values
        sig_next = base.sigma[k + 1].values
        hphi = data.interp.hval(phik)
        hp = data.interp.hprime(phik)
        psi2 = data.potential.psi2(phik)

        cdiag = prm.Ccal * hphi + prm.Bcal
        rhs_s = Sig - dt * prm.Ccal * hp * Phi * sig_next
        Sig_new, it_s, res_s = kernels.solve_reaction_diffusion(
            rhs_s, Sig, cdiag, dt, meta, cg_tol, maxiter)
        check_solver_result("linearized nutrient", it_s, res_s, maxiter, cg_tol, step=k)

        g = prm.P * sig_next - prm.Acal - prm.alpha * u.frames[k].values
        lag = prm.A * (psi2 - s_stab) * Phi
        src = hp * Phi * g + hphi * (prm.P * Sig_new - prm.alpha * w.frames[k].values)
        rhs_p = Phi + dt * kernels.laplacian_apply(lag, meta) + dt * src
        Phi_new, it_p, res_p = kernels.solve_phase_schur(
            rhs_p, Phi, dt * prm.A * s_stab, dt * prm.B, meta, cg_tol, maxiter)
        check_solver_result("linearized phase", it_p, res_p, maxiter, cg_tol, step=k)

        Xi = prm.A * (psi2 * Phi + s_stab * (Phi_new - Phi)) \
            - prm.B * kernels.laplacian_apply(Phi_new, meta)
        if not (np.isfinite(Phi_new).all() and np.isfinite(Sig_new).all()):
            raise DivergenceError("linearized fields", step=k)

        Phi = Phi_new
        Sig = Sig_new
        cap_phi.append(ScalarField(grid, Phi))
        cap_xi.append(ScalarField(grid, Xi))
        cap_sig.append(ScalarField(grid, Sig))

    return LinearizedTrajectory(grid, tg, tuple(cap_phi), tuple(cap_xi), tuple(cap_sig))


def taylor_remainder(data: ProblemData, u_bar: Control, w: Control, eps: float,
                     s_stab: float = DEFAULT_S_STAB, base: StateTrajectory | None = None,
                     lin: LinearizedTrajectory | None = None) -> tuple:
    """Remainder norms of the first-order expansion at u_bar + eps*w.

    Returns (max-node L2 of phi(u+eps w) - phi(u) - eps Phi,
             max-node L2 of the matching sigma remainder).
    Pass base/lin to reuse already-solved pieces across an eps sweep.
    """
    if base is None:
        base = solve_state(data, u_bar, s_stab=s_stab)
    if lin is None:
        lin = solve_linearized(base, data, u_bar, w, s_stab=s_stab)
    traj = solve_state(data, control_axpy(u_bar, eps, w), u_bar.timegrid, s_stab=s_stab)
    theta = 0.0
    rho = 0.0
    for k in range(base.timegrid.n_nodes):
        d_phi = traj.phi[k].values - base.phi[k].values - eps * lin.phi[k].values
        d_sig = traj.sigma[k].values - base.sigma[k].values - eps * lin.sigma[k].values
        theta = max(theta, l2_norm(ScalarField(base.grid, d_phi)))
        rho = max(rho, l2_norm(ScalarField(base.grid, d_sig)))
    return theta, rho
