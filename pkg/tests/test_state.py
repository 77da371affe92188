"""Forward solver: steady states, closed-form nutrient decay, ledgers."""
import numpy as np
import pytest

from _fixtures import equilibrium_problem, half_dose, tanh_problem
from chemodose import (Grid, ModelParams, ProblemData, ScalarField, TimeGrid,
                       const_field, energy, grad_sq_norm, integrate,
                       laplacian_neumann, residual_report, solve_state)
from chemodose.errors import GridMismatchError
from chemodose.model import default_interpolant, default_potential
from chemodose.state import trajectory_series
from chemodose.timegrid import const_control, control_from_matrix


def test_equilibrium_is_stationary():
    grid, tg, data = equilibrium_problem()
    traj = solve_state(data, const_control(grid, tg, 0.7))
    # u acts through h(phi) = h(-1) = 0, so even full dosage changes nothing
    for k in range(tg.n_nodes):
        assert np.max(np.abs(traj.phi[k].values + 1.0)) <= 1e-12
        assert np.max(np.abs(traj.sigma[k].values - 1.0)) <= 1e-12


def test_uniform_nutrient_decay_closed_form():
    # phi = -1 removes consumption; uniform data removes diffusion, leaving
    # sigma^{k+1} = (sigma^k + dt*Bcal*sigmaS) / (1 + dt*Bcal)
    grid = Grid(1, (16,), (1.0,))
    tg = TimeGrid(0.2, 20)
    params = ModelParams()
    data = ProblemData(const_field(grid, -1.0), const_field(grid, 0.8),
                       const_field(grid, 0.3), params,
                       default_potential(), default_interpolant())
    traj = solve_state(data, const_control(grid, tg, 0.7))
    for k in range(tg.n_nodes):
        pred = 0.3 + (0.8 - 0.3) / (1.0 + tg.dt * params.Bcal) ** k
        assert np.max(np.abs(traj.sigma[k].values - pred)) <= 1e-12


def test_source_free_phase_mass_conserved():
    grid, tg, data = tanh_problem(params=ModelParams(P=0.0, Acal=0.0, alpha=0.0))
    u = half_dose(grid, tg)
    traj = solve_state(data, u)
    m0 = integrate(traj.phi[0])
    for k in range(tg.n_nodes):
        assert abs(integrate(traj.phi[k]) - m0) <= 1e-10
    rep = residual_report(traj, data, u)
    assert rep.max_abs_phi_residual() <= 1e-10


def test_mass_ledgers_on_generic_run():
    grid, tg, data = tanh_problem()
    u = half_dose(grid, tg)
    rep = residual_report(solve_state(data, u), data, u)
    assert rep.max_abs_sigma_residual() <= 1e-9
    assert rep.max_abs_phi_residual() <= 1e-8


def test_initial_chemical_potential_definition():
    grid, tg, data = tanh_problem()
    traj = solve_state(data, half_dose(grid, tg))
    prm, pot = data.params, data.potential
    want = (prm.A * pot.psi1(data.phi0.values)
            - prm.B * laplacian_neumann(data.phi0).values)
    assert np.max(np.abs(traj.mu[0].values - want)) <= 1e-12


def test_energy_definition():
    grid, _, data = tanh_problem()
    e = energy(data.phi0, data)
    prm = data.params
    want = (prm.A * integrate(ScalarField(grid, data.potential.psi(data.phi0.values)))
            + 0.5 * prm.B * grad_sq_norm(data.phi0))
    assert e == pytest.approx(want, rel=1e-13)


def test_solver_is_deterministic():
    grid, tg, data = tanh_problem(n_steps=20)
    rng = np.random.default_rng(11)
    u = control_from_matrix(grid, tg, rng.uniform(0.0, 1.0, (tg.n_nodes, grid.n_cells)))
    a = solve_state(data, u)
    b = solve_state(data, u)
    for k in range(tg.n_nodes):
        assert np.array_equal(a.phi[k].values, b.phi[k].values)
        assert np.array_equal(a.sigma[k].values, b.sigma[k].values)
        assert np.array_equal(a.mu[k].values, b.mu[k].values)


def test_sigma_bounds_on_rough_data():
    grid = Grid(1, (48,), (1.0,))
    tg = TimeGrid(0.25, 50)
    rng = np.random.default_rng(2)
    data = ProblemData(ScalarField(grid, rng.uniform(-1, 1, grid.n_cells)),
                       ScalarField(grid, rng.uniform(0, 1, grid.n_cells)),
                       ScalarField(grid, rng.uniform(0, 1, grid.n_cells)),
                       ModelParams(), default_potential(), default_interpolant())
    u = control_from_matrix(grid, tg, rng.uniform(0, 1, (tg.n_nodes, grid.n_cells)))
    traj = solve_state(data, u)
    lo = min(f.values.min() for f in traj.sigma)
    hi = max(f.values.max() for f in traj.sigma)
    assert lo >= -1e-8 and hi <= 1.0 + 1e-8


def test_problem_data_validation():
    grid = Grid(1, (8,), (1.0,))
    ok = const_field(grid, 0.5)
    with pytest.raises(ValueError):
        ProblemData(ok, const_field(grid, 1.5), ok, ModelParams(),
                    default_potential(), default_interpolant())
    with pytest.raises(ValueError):
        ProblemData(ok, ok, const_field(grid, -0.1), ModelParams(),
                    default_potential(), default_interpolant())


def test_control_grid_mismatch_rejected():
    grid, tg, data = tanh_problem()
    other = TimeGrid(0.25, 41)
    with pytest.raises(GridMismatchError):
        solve_state(data, const_control(grid, other, 0.5), timegrid=tg)


def test_trajectory_series_rows():
    grid, tg, data = tanh_problem(n_steps=5)
    traj = solve_state(data, half_dose(grid, tg))
    rows = list(trajectory_series(traj, data))
    assert len(rows) == tg.n_nodes
    k, t, m_phi, m_sig, e, smin, smax = rows[0]
    assert (k, t) == (0, 0.0)
    assert m_phi == pytest.approx(integrate(traj.phi[0]))
    assert e == pytest.approx(energy(traj.phi[0], data))
    assert smin <= smax
