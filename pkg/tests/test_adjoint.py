"""Backward (adjoint) sweep: terminal data, tracking window, duality."""

import dataclasses

import numpy as np
import pytest

from _fixtures import half_dose, tanh_problem, tracking_objective
from chemodose import (GridMismatchError, TimeGrid, adjoint_source,
                       check_duality, const_control, duality_gap, grad_u,
                       laplacian_neumann, solve_adjoint, solve_state)
from chemodose.verification import random_smooth_control


@pytest.fixture(scope="module")
def problem():
    grid, tg, data = tanh_problem(n=32, t_end=0.5, n_steps=50)
    obj = tracking_objective(grid)
    u = half_dose(grid, tg)
    traj = solve_state(data, u)
    return grid, tg, data, obj, u, traj


def test_terminal_conditions_vanish(problem):
    grid, tg, data, obj, u, traj = problem
    tau = 37
    adj = solve_adjoint(traj, data, u, obj, tau)
    assert adj.tau_index == tau
    assert len(adj.p) == tau + 1
    assert np.all(adj.p[tau].values == 0.0)
    assert np.all(adj.q[tau].values == 0.0)
    assert np.all(adj.r_adj[tau].values == 0.0)
    # the sweep produces a nonzero multiplier before the stopping node
    assert np.max(np.abs(adj.p[tau - 1].values)) > 0.0


def test_extended_p_pads_with_zeros(problem):
    grid, tg, data, obj, u, traj = problem
    tau = 37
    adj = solve_adjoint(traj, data, u, obj, tau)
    assert adj.extended_p(10) is adj.p[10]
    assert np.all(adj.extended_p(tau + 1).values == 0.0)
    assert np.all(adj.extended_p(tg.n_steps).values == 0.0)
    with pytest.raises(ValueError, match="outside"):
        adj.extended_p(tg.n_steps + 1)


def test_tracking_window_boundaries(problem):
    grid, tg, data, obj, u, traj = problem
    tau = 37
    m = tg.window_steps(obj.r_relax)
    pure_S = dataclasses.replace(obj, betaQ=0.0, betaOmega=0.0, betaS=1.0)
    # averaging window covers tau-m < k <= tau; outside it only the
    # terminal-time tracking term (here zeroed) contributes
    phi_k = traj.phi[20]
    off = adjoint_source(phi_k, pure_S, tau - m, tau, tg).values
    on_lo = adjoint_source(phi_k, pure_S, tau - m + 1, tau, tg).values
    on_hi = adjoint_source(phi_k, pure_S, tau, tau, tg).values
    beyond = adjoint_source(phi_k, pure_S, tau + 1, tau, tg).values
    assert np.all(off == 0.0)
    assert np.all(beyond == 0.0)
    expected = 0.5 / obj.r_relax
    assert np.allclose(on_lo, expected, rtol=0, atol=1e-15)
    assert np.allclose(on_hi, expected, rtol=0, atol=1e-15)


def test_source_is_linear_in_the_betas(problem):
    grid, tg, data, obj, u, traj = problem
    tau = 37
    phi_k = traj.phi[30]
    k = tau  # inside the window
    parts = []
    for name in ("betaQ", "betaOmega", "betaS"):
        zeroed = {n: 0.0 for n in ("betaQ", "betaOmega", "betaS") if n != name}
        spec = dataclasses.replace(obj, **zeroed)
        parts.append(adjoint_source(phi_k, spec, k, tau, tg).values)
    combined = adjoint_source(phi_k, obj, k, tau, tg).values
    assert np.allclose(combined, sum(parts), rtol=0, atol=1e-14)


def test_q_is_the_laplacian_of_p(problem):
    grid, tg, data, obj, u, traj = problem
    adj = solve_adjoint(traj, data, u, obj, 37)
    for k in (5, 20, 36):
        lap = laplacian_neumann(adj.p[k]).values
        assert np.allclose(adj.q[k].values, lap, rtol=0, atol=1e-10)


def test_duality_pairing(problem):
    grid, tg, data, obj, u, traj = problem
    rng = np.random.default_rng(2)
    w = random_smooth_control(grid, tg, rng)
    gap = duality_gap(data, u, w, obj, 37)
    assert gap.mismatch <= 1e-2
    # flipping the source sign must wreck the pairing identity
    bad = duality_gap(data, u, w, obj, 37, sabotage=True)
    assert bad.mismatch >= 1e-1
    res = check_duality(data, u, w, obj, 37)
    assert res.passed
    assert res.mismatch_fine < res.mismatch_coarse
    assert res.decay >= 1.7


def test_tau_zero_gives_pure_penalty_gradient(problem):
    grid, tg, data, obj, u, traj = problem
    adj = solve_adjoint(traj, data, u, obj, 0)
    assert np.all(adj.p[0].values == 0.0)
    g = grad_u(traj, adj, u, data, obj)
    for k in range(tg.n_nodes):
        assert np.array_equal(g.frames[k].values, obj.betaU * u.frames[k].values)


def test_tau_out_of_range(problem):
    grid, tg, data, obj, u, traj = problem
    with pytest.raises(ValueError, match="tau_index"):
        solve_adjoint(traj, data, u, obj, tg.n_steps + 1)
    with pytest.raises(ValueError, match="tau_index"):
        solve_adjoint(traj, data, u, obj, -1)


def test_control_timegrid_mismatch(problem):
    grid, tg, data, obj, u, traj = problem
    other = const_control(grid, TimeGrid(0.5, tg.n_steps + 1), 0.5)
    with pytest.raises(GridMismatchError):
        solve_adjoint(traj, data, other, obj, 10)
