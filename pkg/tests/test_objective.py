"""Objective terms against closed forms on a constant trajectory."""

import dataclasses

import numpy as np
import pytest

from chemodose import (Grid, GridMismatchError, ModelParams, ObjectiveSpec,
                       ProblemData, TimeGrid, const_control, const_field,
                       default_interpolant, default_potential,
                       default_tau_tol, dtau_J, eval_Jr, eval_Jr_terms_nodes,
                       fonc_residuals, grad_u, solve_adjoint)
from chemodose.objective import target_at
from chemodose.state import StateTrajectory
from chemodose.verification import refine_objective_in_time

C, S, Q_TGT, W_TGT, UBAR = 0.3, 0.6, -0.2, 0.1, 0.4
BQ, BO, BS, BU, BT = 1.3, 0.7, 0.2, 0.11, 0.08


@pytest.fixture(scope="module")
def setup():
    grid = Grid(1, (8,), (2.0,))
    tg = TimeGrid(0.5, 25)
    n = tg.n_nodes
    phi = tuple(const_field(grid, C) for _ in range(n))
    mu = tuple(const_field(grid, 0.0) for _ in range(n))
    sigma = tuple(const_field(grid, S) for _ in range(n))
    traj = StateTrajectory(grid, tg, phi, mu, sigma)
    u = const_control(grid, tg, UBAR)
    obj = ObjectiveSpec(betaQ=BQ, betaOmega=BO, betaS=BS, betaU=BU, betaT=BT,
                        r_relax=0.1, phiQ=const_field(grid, Q_TGT),
                        phiOmega=const_field(grid, W_TGT))
    # P = Acal = alpha = 0 keeps the constant profile an exact steady state
    params = ModelParams(P=0.0, Acal=0.0, Ccal=1.0, Bcal=1.0, alpha=0.0,
                         A=1.0, B=1e-3)
    data = ProblemData(const_field(grid, C), const_field(grid, S),
                       const_field(grid, S), params,
                       default_potential(), default_interpolant())
    return grid, tg, traj, u, obj, data


def test_terms_match_closed_forms(setup):
    grid, tg, traj, u, obj, data = setup
    vol = 2.0
    terms = eval_Jr_terms_nodes(traj, u, obj)
    # the dose penalty integrates over the whole horizon, so it is the
    # same number at every candidate node
    assert np.ptp(terms["term_u"]) == 0.0
    assert np.isclose(terms["term_u"][0], 0.5 * BU * tg.t_end * vol * UBAR ** 2,
                      rtol=1e-13, atol=0)
    for tau in (0, 5, 12, 25):
        t = tau * tg.dt
        want_Q = 0.5 * BQ * t * vol * (C - Q_TGT) ** 2
        want_O = 0.5 * BO * vol * (C - W_TGT) ** 2
        want_S = BS * vol * (1.0 + C) / 2.0
        want_T = BT * t
        assert np.isclose(terms["term_Q"][tau], want_Q, rtol=1e-12, atol=1e-14)
        assert np.isclose(terms["term_Omega"][tau], want_O, rtol=1e-12, atol=0)
        assert np.isclose(terms["term_S"][tau], want_S, rtol=1e-12, atol=0)
        assert np.isclose(terms["term_T"][tau], want_T, rtol=1e-12, atol=1e-16)
        total = want_Q + want_O + want_S + terms["term_u"][0] + want_T
        assert np.isclose(eval_Jr(traj, u, obj, tau), total, rtol=1e-12, atol=0)
        assert np.isclose(terms["total"][tau], total, rtol=1e-12, atol=0)


def test_dtau_control_term_is_the_dose_rate(setup):
    grid, tg, traj, u, obj, data = setup
    vol = 2.0
    for tau in (5, 12, 25):
        diff = (dtau_J(traj, u, obj, tau, include_control_term=True)
                - dtau_J(traj, u, obj, tau))
        assert np.isclose(diff, 0.5 * BU * vol * UBAR ** 2, rtol=1e-13, atol=0)


def test_pure_time_penalty_derivative(setup):
    grid, tg, traj, u, obj, data = setup
    timed = dataclasses.replace(obj, betaQ=0.0, betaOmega=0.0, betaS=0.0)
    for tau in (1, 12, 24):
        assert dtau_J(traj, u, timed, tau) == BT


def test_target_series_clamps_below_zero(setup):
    grid, tg, traj, u, obj, data = setup
    series = tuple(const_field(grid, float(k)) for k in range(tg.n_nodes))
    assert target_at(series, 4, tg.n_nodes) is series[4]
    assert target_at(series, -3, tg.n_nodes) is series[0]
    const = const_field(grid, 2.0)
    assert target_at(const, 17, tg.n_nodes) is const
    with pytest.raises(GridMismatchError, match="target series has"):
        target_at(series[:-1], 4, tg.n_nodes)


def test_fonc_tau_cases(setup):
    grid, tg, traj, u, obj, data = setup
    # growing J(tau): interior and right-boundary stationarity must fail,
    # the left boundary is consistent with dtau > 0
    for tau, case, ok in ((0, "left-boundary", True),
                          (12, "interior", False),
                          (25, "right-boundary", False)):
        adj = solve_adjoint(traj, data, u, obj, tau)
        rep = fonc_residuals(traj, adj, u, data, obj, tau)
        assert rep.tau_case == case
        assert rep.tau_satisfied is ok
        assert rep.dtau_value > 0
    assert rep.satisfied is False  # u = 0.4 is not stationary either


def test_grad_u_formula(setup):
    grid, tg, traj, u, obj, data = setup

    class FrozenAdjoint:
        def extended_p(self, k):
            return const_field(grid, 0.25)

    hot = dataclasses.replace(data.params, alpha=2.0)
    data2 = dataclasses.replace(data, params=hot)
    g = grad_u(traj, FrozenAdjoint(), u, data2, obj)
    hval = data2.interp.hval(np.full(grid.n_cells, C))
    want = BU * UBAR - 2.0 * hval * 0.25
    for k in (0, 10, 25):
        assert np.allclose(g.frames[k].values, want, rtol=0, atol=1e-16)


def test_spec_validation():
    grid = Grid(1, (8,), (1.0,))
    tgt = const_field(grid, 0.0)
    good = dict(betaQ=1.0, betaOmega=0.5, betaS=0.1, betaU=0.1, betaT=0.0,
                r_relax=0.05, phiQ=tgt, phiOmega=tgt)
    ObjectiveSpec(**good)  # betaT = 0 is allowed
    with pytest.raises(ValueError, match="betaU must be positive"):
        ObjectiveSpec(**{**good, "betaU": 0.0})
    with pytest.raises(ValueError, match="betaQ must be nonnegative"):
        ObjectiveSpec(**{**good, "betaQ": -1.0})
    with pytest.raises(ValueError, match="r_relax must be positive"):
        ObjectiveSpec(**{**good, "r_relax": 0.0})
    series = ObjectiveSpec(**{**good, "phiQ": [tgt, tgt]})
    assert isinstance(series.phiQ, tuple)


def test_default_tau_tol_scales_with_betaT(setup):
    grid, tg, traj, u, obj, data = setup
    assert default_tau_tol(obj) == 1e-3 * (BT + 1.0)


def test_refine_objective_in_time(setup):
    grid, tg, traj, u, obj, data = setup
    frames = tuple(const_field(grid, float(k)) for k in range(5))
    series_obj = dataclasses.replace(obj, phiQ=frames)
    fine = refine_objective_in_time(series_obj, 2)
    assert len(fine.phiQ) == 9
    values = [f.values[0] for f in fine.phiQ]
    assert values == [0, 0, 1, 1, 2, 2, 3, 3, 4]
    assert fine.phiOmega is series_obj.phiOmega  # plain fields pass through
    assert refine_objective_in_time(series_obj, 1) is series_obj
    with pytest.raises(ValueError):
        refine_objective_in_time(series_obj, 0)
