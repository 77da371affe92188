"""Costate (adjoint) solver marching backward from the treatment time.

Continuous system on [0, tau], terminal values p(tau) = r(tau) = 0:

    -d_t p + B Lap q = A psi''(phi) q - Ccal h'(phi) sigma r
                       + h'(phi) (P sigma - Acal - alpha u) p + source
    q = Lap p
    -d_t r = Lap r - Bcal r - Ccal h(phi) r + P h(phi) p

where source carries the tracking weights, with the window indicator
resolved at node granularity (t_k in window iff tau - r_relax < t_k <= tau).

Discretization mirrors the forward freezes (coefficients at the target
node k) rather than transposing the discrete forward step, so duality
against the linearized solve holds to first order in dt instead of to
rounding; that gap is what check_duality measures. Per step k+1 -> k:

    (I + dt(-Lap + Bcal + Ccal h(phi^k))) r^k = r^{k+1} + dt P h(phi^k) p^{k+1}

    (I + dt B Lap^2 - dt A diag(psi''(phi^k)) Lap - dt diag(gk)) p^k
        = p^{k+1} + dt (source^k - Ccal h'(phi^k) sigma^k r^k),
    gk = h'(phi^k) (P sigma^k - Acal - alpha u^k)

    q^k = Lap p^k

The p system is nonsymmetric through the psi'' term, hence BiCGStab.
The sabotage switch flips the sign of the tracking source, which leaves
the operator (and hence solvability) untouched while making the costate
maximally wrong; the verification suite uses it as a negative control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DivergenceError, GridMismatchError
from .grid import Grid, ScalarField, check_same_grid, const_field
from .objective import ObjectiveSpec, target_at
from .state import (CG_TOL, ProblemData, StateTrajectory, _maxiter,
                    check_solver_result)
from .timegrid import Control, TimeGrid


@dataclass(frozen=True)
class AdjointTrajectory:
    """Costate fields p, q, r_adj on nodes 0..tau_index.

    extended_p(k) continues p by zero on the unused tail of the horizon,
    which is the form the reduced gradient consumes.
    """

    grid: Grid
    timegrid: TimeGrid
    tau_index: int
    p: tuple = field(repr=False)
    q: tuple = field(repr=False)
    r_adj: tuple = field(repr=False)

    def __post_init__(self):
        if not (len(self.p) == len(self.q) == len(self.r_adj) == self.tau_index + 1):
            raise GridMismatchError("adjoint trajectory length != tau_index + 1")

    def extended_p(self, k: int) -> ScalarField:
        if k <= self.tau_index:
            return self.p[k]
        if k > self.timegrid.n_steps:
            raise ValueError(f"node {k} outside the time grid")
        return const_field(self.grid, 0.0)


def adjoint_source(phi_k: ScalarField, obj: ObjectiveSpec, k: int,
                   tau_index: int, timegrid: TimeGrid) -> ScalarField:
    """Tracking source at node k for a run stopped at tau_index.

    beta_Q (phi - phiQ) plus, on nodes inside the averaging window
    ending at tau_index, (2 beta_Omega (phi - phiOmega) + beta_S) / (2 r_relax).
    """
    n_nodes = timegrid.n_nodes
    phi = phi_k.values
    src = obj.betaQ * (phi - target_at(obj.phiQ, k, n_nodes).values)
    m = timegrid.window_steps(obj.r_relax)
    if tau_index - m < k <= tau_index:
        src = src + (obj.betaOmega * (phi - target_at(obj.phiOmega, k, n_nodes).values)
                     + 0.5 * obj.betaS) / obj.r_relax
    return ScalarField(phi_k.grid, src)


def solve_adjoint(traj: StateTrajectory, data: ProblemData, u: Control,
                  obj: ObjectiveSpec, tau_index: int, sabotage: bool = False,
                  cg_tol: float = CG_TOL) -> AdjointTrajectory:
    """Backward sweep from tau_index down to node 0."""
    grid = check_same_grid(traj.phi[0], data.phi0, u.frames[0])
    tg = traj.timegrid
    if u.timegrid != tg:
        raise GridMismatchError("control does not match the trajectory time grid")
    if not 0 <= tau_index <= tg.n_steps:
        raise ValueError(f"tau_index {tau_index} outside node range 0..{tg.n_steps}")
    meta = grid.kernel_meta
    maxiter = _maxiter(grid)
    prm = data.params
    dt = tg.dt
    src_sign = -1.0 if sabotage else 1.0

    zeros = np.zeros(grid.n_cells)
    p = [None] * (tau_index + 1)
    q = [None] * (tau_index + 1)
    r = [None] * (tau_index + 1)
    p[tau_index] = ScalarField(grid, zeros)
    q[tau_index] = ScalarField(grid, zeros)
    r[tau_index] = ScalarField(grid, zeros)

    for k in range(tau_index - 1, -1, -1):
        phik = traj.phi[k].values
        sigk = traj.sigma[k].values
        hphi = data.interp.hval(phik)
        hp = data.interp.hprime(phik)
        psi2 = data.potential.psi2(phik)
        p_next = p[k + 1].values
        r_next = r[k + 1].values

        cdiag = prm.Ccal * hphi + prm.Bcal
        rhs_r = r_next + dt * prm.P * hphi * p_next
        rk, it_r, res_r = kernels.solve_reaction_diffusion(
            rhs_r, r_next, cdiag, dt, meta, cg_tol, maxiter)
        check_solver_result("adjoint nutrient", it_r, res_r, maxiter, cg_tol, step=k)

        gk = hp * (prm.P * sigk - prm.Acal - prm.alpha * u.frames[k].values)
        src = src_sign * adjoint_source(traj.phi[k], obj, k, tau_index, tg).values
        rhs_p = p_next + dt * (src - prm.Ccal * hp * sigk * rk)
        pk, it_p, res_p = kernels.solve_adjoint_phase(
            rhs_p, p_next, dt * prm.A * psi2, dt * gk, dt * prm.B,
            meta, cg_tol, maxiter)
        check_solver_result("adjoint phase", it_p, res_p, maxiter, cg_tol, step=k)
        if not (np.isfinite(pk).all() and np.isfinite(rk).all()):
            raise DivergenceError("adjoint fields", step=k)

        p[k] = ScalarField(grid, pk)
        q[k] = ScalarField(grid, kernels.laplacian_apply(pk, meta))
        r[k] = ScalarField(grid, rk)

    return AdjointTrajectory(grid, tg, tau_index, tuple(p), tuple(q), tuple(r))
