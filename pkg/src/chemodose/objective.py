"""Relaxed objective, reduced gradient and first-order optimality residuals.

The functional splits into five terms: evolution tracking on [0, tau],
terminal tracking and tumour-size penalties averaged over the trailing
window (tau - r, tau], the dose penalty over all of [0, T], and the
linear time penalty beta_T tau.

All time integrals use the composite trapezoid rule on node values.
Window integrals cover exactly m = r_relax / dt node intervals; nodes
with negative time evaluate phi at the initial datum (the objective's
negative-time extension) and per-node target series clamp to their first
frame there.

The treatment time enters only through quadrature limits, so a single
trajectory prices every candidate tau node (used by the optimizer scan).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError
from .grid import ScalarField, check_same_grid
from .state import ProblemData, StateTrajectory
from .timegrid import Control, control_inner, control_norm, control_axpy, project_admissible


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weights, window width and tracking targets.

    phiQ / phiOmega accept a single ScalarField (time-constant target) or
    a per-node sequence matching the run's time grid.
    """

    betaQ: float
    betaOmega: float
    betaS: float
    betaU: float
    betaT: float
    r_relax: float
    phiQ: object
    phiOmega: object

    def __post_init__(self):
        for name in ("betaQ", "betaOmega", "betaS", "betaT"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.betaU <= 0:
            raise ValueError(f"betaU must be positive, got {self.betaU}")
        if self.r_relax <= 0:
            raise ValueError(f"r_relax must be positive, got {self.r_relax}")
        for name in ("phiQ", "phiOmega"):
            tgt = getattr(self, name)
            if not isinstance(tgt, ScalarField):
                object.__setattr__(self, name, tuple(tgt))


def target_at(target, k: int, n_nodes: int) -> ScalarField:
    """Target frame at node k; series clamp to frame 0 for k < 0."""
    if isinstance(target, ScalarField):
        return target
    if len(target) != n_nodes:
        raise GridMismatchError(
            f"target series has {len(target)} frames for {n_nodes} nodes")
    return target[max(k, 0)]


@dataclass(frozen=True)
class _NodeIntegrals:
    """Per-node space integrals feeding every objective formula.

    track_q[k]    = ||phi^k - phiQ^k||^2,              k = 0..N
    track_om[j+m] = ||phi^j - phiOmega^j||^2,          j = -m..N
    size[j+m]     = int (1 + phi^j),                   j = -m..N
    dose[k]       = ||u^k||^2,                         k = 0..N

    Negative j uses phi = phi0.
    """

    m: int
    track_q: np.ndarray
    track_om: np.ndarray
    size: np.ndarray
    dose: np.ndarray


def _node_integrals(traj: StateTrajectory, u: Control, obj: ObjectiveSpec) -> _NodeIntegrals:
    tg = traj.timegrid
    if u.timegrid != tg:
        raise GridMismatchError("control does not match the trajectory time grid")
    m = tg.window_steps(obj.r_relax)
    n_nodes = tg.n_nodes
    vol = traj.grid.cell_volume

    track_q = np.empty(n_nodes)
    dose = np.empty(n_nodes)
    for k in range(n_nodes):
        dq = traj.phi[k].values - target_at(obj.phiQ, k, n_nodes).values
        track_q[k] = vol * float(np.dot(dq, dq))
        uv = u.frames[k].values
        dose[k] = vol * float(np.dot(uv, uv))

    track_om = np.empty(m + n_nodes)
    size = np.empty(m + n_nodes)
    phi0 = traj.phi[0].values
    for j in range(-m, n_nodes):
        phi_j = phi0 if j < 0 else traj.phi[j].values
        dom = phi_j - target_at(obj.phiOmega, j, n_nodes).values
        track_om[j + m] = vol * float(np.dot(dom, dom))
        size[j + m] = vol * float(np.sum(1.0 + phi_j))
    return _NodeIntegrals(m, track_q, track_om, size, dose)


def _cum_trapz(a: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty_like(a)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (a[1:] + a[:-1]), out=out[1:])
    return out


def _window_trapz(ext: np.ndarray, m: int, dt: float) -> np.ndarray:
    """Trapezoid over nodes j = k-m..k of the extended sequence, per k."""
    n_nodes = ext.size - m
    out = np.empty(n_nodes)
    acc = dt * (0.5 * ext[0] + ext[1:m].sum() + 0.5 * ext[m])
    out[0] = acc
    for k in range(1, n_nodes):
        acc += 0.5 * dt * (ext[k + m] + ext[k + m - 1] - ext[k] - ext[k - 1])
        out[k] = acc
    return out


def eval_Jr_terms_nodes(traj: StateTrajectory, u: Control, obj: ObjectiveSpec):
    """The five objective terms at every candidate tau node.

    Returns dict of arrays over k = 0..n_steps:
    term_Q, term_Omega, term_S, term_u (constant), term_T, and total.
    """
    tg = traj.timegrid
    dt = tg.dt
    ints = _node_integrals(traj, u, obj)
    inv_r = 1.0 / obj.r_relax

    term_q = 0.5 * obj.betaQ * _cum_trapz(ints.track_q, dt)
    term_om = 0.5 * obj.betaOmega * inv_r * _window_trapz(ints.track_om, ints.m, dt)
    term_s = 0.5 * obj.betaS * inv_r * _window_trapz(ints.size, ints.m, dt)
    w = np.full(tg.n_nodes, dt)
    w[0] = w[-1] = 0.5 * dt
    term_u = np.full(tg.n_nodes, 0.5 * obj.betaU * float(np.dot(w, ints.dose)))
    term_t = obj.betaT * tg.nodes()
    total = term_q + term_om + term_s + term_u + term_t
    return {"term_Q": term_q, "term_Omega": term_om, "term_S": term_s,
            "term_u": term_u, "term_T": term_t, "total": total}


def eval_Jr(traj: StateTrajectory, u: Control, obj: ObjectiveSpec, tau_index: int) -> float:
    """Relaxed objective with treatment time at node tau_index."""
    _check_tau(traj, tau_index)
    return float(eval_Jr_terms_nodes(traj, u, obj)["total"][tau_index])


def _check_tau(traj: StateTrajectory, tau_index: int) -> None:
    if not 0 <= tau_index <= traj.timegrid.n_steps:
        raise ValueError(
            f"tau_index {tau_index} outside node range 0..{traj.timegrid.n_steps}")


def dtau_J(traj: StateTrajectory, u: Control, obj: ObjectiveSpec, tau_index: int,
           include_control_term: bool = False) -> float:
    """Derivative of the objective in the treatment time at a node.

    include_control_term adds (betaU/2) ||u(tau)||^2 for comparison runs;
    the default matches the stationarity condition actually used (the dose
    term integrates over the fixed horizon [0, T], so it carries no tau
    dependence).
    """
    _check_tau(traj, tau_index)
    ints = _node_integrals(traj, u, obj)
    k = tau_index
    m = ints.m
    inv2r = 0.5 / obj.r_relax
    val = obj.betaT \
        + 0.5 * obj.betaQ * ints.track_q[k] \
        + obj.betaOmega * inv2r * (ints.track_om[k + m] - ints.track_om[k]) \
        + obj.betaS * inv2r * (ints.size[k + m] - ints.size[k])
    if include_control_term:
        val += 0.5 * obj.betaU * ints.dose[k]
    return float(val)


def grad_u(traj: StateTrajectory, adj, u: Control, data: ProblemData,
           obj: ObjectiveSpec) -> Control:
    """Reduced gradient field g(x, t_k) = betaU u - alpha h(phi) p_ext.

    adj supplies extended_p(k), the costate continued by zero past the
    treatment time.
    """
    grid = check_same_grid(traj.phi[0], u.frames[0])
    alpha = data.params.alpha
    frames = []
    for k in range(traj.timegrid.n_nodes):
        hphi = data.interp.hval(traj.phi[k].values)
        g = obj.betaU * u.frames[k].values - alpha * hphi * adj.extended_p(k).values
        frames.append(ScalarField(grid, g))
    return Control(u.timegrid, tuple(frames))


@dataclass(frozen=True)
class FoncReport:
    """First-order necessary-condition residuals at a candidate solution.

    stationarity_u is ||u - proj(u - g)|| in L2(Q); the tau condition is
    sign-classified by node position: >= -tol at the left boundary,
    |.| <= tol interior, <= tol at the right boundary.
    """

    stationarity_u: float
    stationarity_tol: float
    u_satisfied: bool
    dtau_value: float
    tau_tol: float
    tau_index: int
    tau_case: str
    tau_satisfied: bool
    gradient: Control = field(repr=False, default=None)

    @property
    def satisfied(self) -> bool:
        return self.u_satisfied and self.tau_satisfied


def default_tau_tol(obj: ObjectiveSpec) -> float:
    return 1e-3 * (obj.betaT + 1.0)


def fonc_residuals(traj: StateTrajectory, adj, u: Control, data: ProblemData,
                   obj: ObjectiveSpec, tau_index: int,
                   stationarity_tol: float = 1e-4, tau_tol: float | None = None,
                   include_control_term: bool = False) -> FoncReport:
    _check_tau(traj, tau_index)
    if tau_tol is None:
        tau_tol = default_tau_tol(obj)
    g = grad_u(traj, adj, u, data, obj)
    trial = project_admissible(control_axpy(u, -1.0, g))
    stat = float(control_norm(control_axpy(u, -1.0, trial)))
    dtau = dtau_J(traj, u, obj, tau_index, include_control_term=include_control_term)
    n_steps = traj.timegrid.n_steps
    if tau_index == 0:
        case, ok = "left-boundary", dtau >= -tau_tol
    elif tau_index == n_steps:
        case, ok = "right-boundary", dtau <= tau_tol
    else:
        case, ok = "interior", abs(dtau) <= tau_tol
    return FoncReport(stat, stationarity_tol, stat <= stationarity_tol,
                      dtau, tau_tol, tau_index, case, bool(ok), gradient=g)
