"""End-to-end acceptance gate.

Each test prints one summary line so a full run reads as a checklist.
The randomized-run fixture is shared by the bounds and conservation
criteria; everything else builds its own problem at the sizes the
criteria name.
"""

import dataclasses
import os
import time

import numpy as np
import pytest

from _fixtures import half_dose, tanh_problem, tracking_objective
from chemodose import (Grid, ModelParams, OptimizerConfig, ProblemData,
                       TimeGrid, check_dtau_fd, check_duality,
                       check_energy_decay, check_gradient_fd, check_taylor,
                       check_sigma_bounds, const_control, control_norm,
                       default_interpolant, default_potential, dtau_J,
                       duality_gap, optimize, solve_state)
from chemodose.cli import main as cli_main
from chemodose.config import build_problem, resolve_config_arg
from chemodose.verification import (check_conservation,
                                    random_admissible_control,
                                    random_rough_field, random_smooth_control)


def report(tag: str, ok: bool, detail: str) -> None:
    print(f"[{tag}] {'PASS' if ok else 'FAIL'}: {detail}")


@pytest.fixture(scope="module")
def randomized_runs():
    """50 solves from rough random admissible data at the reference size."""
    grid = Grid(1, (128,), (1.0,))
    tg = TimeGrid(1.0, 200)
    params = ModelParams()
    pot, interp = default_potential(), default_interpolant()

    # absorb kernel compilation before the clock starts
    wg, wtg, wdata = tanh_problem(n=16, t_end=0.05, n_steps=8)
    solve_state(wdata, half_dose(wg, wtg))

    rng = np.random.default_rng(0)
    mn, mx, worst_sigma, worst_phi = np.inf, -np.inf, 0.0, 0.0
    t0 = time.perf_counter()
    for _ in range(50):
        data = ProblemData(random_rough_field(grid, rng, -1.0, 1.0),
                           random_rough_field(grid, rng, 0.0, 1.0),
                           random_rough_field(grid, rng, 0.0, 1.0),
                           params, pot, interp)
        u = random_admissible_control(grid, tg, rng)
        traj = solve_state(data, u)
        b = check_sigma_bounds(data, u, traj=traj)
        c = check_conservation(data, u, traj=traj)
        mn, mx = min(mn, b.min_sigma), max(mx, b.max_sigma)
        worst_sigma = max(worst_sigma, c.max_sigma_residual)
        worst_phi = max(worst_phi, c.max_phi_residual)
    elapsed = time.perf_counter() - t0
    return mn, mx, worst_sigma, worst_phi, elapsed


def test_criterion_01_sigma_bounds_on_randomized_runs(randomized_runs):
    mn, mx, _, _, elapsed = randomized_runs
    ok = mn >= -1e-8 and mx <= 1.0 + 1e-8 and elapsed <= 60.0
    report("C01", ok, f"50 runs: min sigma {mn:+.3e}, max sigma - 1 "
                      f"{mx - 1.0:+.3e}, {elapsed:.1f}s")
    assert mn >= -1e-8
    assert mx <= 1.0 + 1e-8
    assert elapsed <= 60.0


def test_criterion_02_nutrient_mass_ledger(randomized_runs):
    _, _, worst_sigma, worst_phi, _ = randomized_runs
    ok = worst_sigma <= 1e-9
    report("C02", ok, f"worst per-step nutrient mass residual {worst_sigma:.3e}, "
                      f"phase residual {worst_phi:.3e}")
    assert worst_sigma <= 1e-9


def test_criterion_03_energy_decay():
    grid = Grid(1, (128,), (1.0,))
    rng = np.random.default_rng(0)
    params = ModelParams(P=0.0, Acal=0.0, alpha=0.0)
    data = ProblemData(random_rough_field(grid, rng, -1.0, 1.0),
                       random_rough_field(grid, rng, 0.0, 1.0),
                       random_rough_field(grid, rng, 0.0, 1.0),
                       params, default_potential(), default_interpolant())
    res = check_energy_decay(data, TimeGrid(2.5, 500), tol=1e-10)
    report("C03", res.passed,
           f"max energy increment over 500 steps {res.max_increment:+.3e}")
    assert res.passed


def test_criterion_04_taylor_remainder_order():
    grid, tg, data = tanh_problem(n=64, t_end=0.5, n_steps=100)
    u = half_dose(grid, tg)
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    slopes = []
    for _ in range(3):
        w = random_smooth_control(grid, tg, rng)
        res = check_taylor(data, u, w)
        slopes.append(res.slope)
        assert res.passed
    elapsed = time.perf_counter() - t0
    ok = all(1.8 <= s <= 2.2 for s in slopes) and elapsed <= 120.0
    report("C04", ok, "remainder slopes "
           + ", ".join(f"{s:.4f}" for s in slopes) + f", {elapsed:.1f}s")
    assert all(1.8 <= s <= 2.2 for s in slopes)
    assert elapsed <= 120.0


def test_criterion_05_duality_gap_and_decay():
    grid, tg, data = tanh_problem(n=128, t_end=1.0, n_steps=100)
    obj = tracking_objective(grid)
    u = half_dose(grid, tg)
    w = random_smooth_control(grid, tg, np.random.default_rng(2))
    res = check_duality(data, u, w, obj, 75)
    sab = duality_gap(data, u, w, obj, 75, sabotage=True)
    ok = (res.mismatch_coarse <= 1e-2 and res.decay >= 1.7
          and sab.mismatch >= 1e-1)
    report("C05", ok, f"mismatch {res.mismatch_coarse:.3e} at dt=1e-2, "
                      f"decay {res.decay:.2f} at dt=5e-3, "
                      f"sabotaged mismatch {sab.mismatch:.2f}")
    assert res.mismatch_coarse <= 1e-2
    assert res.decay >= 1.7
    assert res.passed
    assert sab.mismatch >= 1e-1


def test_criterion_06_reduced_gradient_against_fd():
    grid, tg, data = tanh_problem(n=32, t_end=0.25, n_steps=4000)
    obj = tracking_objective(grid, betaQ=1.0, betaOmega=0.25, betaS=0.05,
                             betaU=0.05, betaT=0.05, r_relax=0.1)
    u = half_dose(grid, tg)
    res = check_gradient_fd(data, u, obj, 3000, seed=0)
    best = [d.best_rel_err for d in res.directions]
    slopes = [d.slope for d in res.directions]
    ok = (all(b <= 1e-3 for b in best)
          and all(1.7 <= s <= 2.3 for s in slopes))
    report("C06", ok, f"5 directions: worst rel err {max(best):.3e}, "
                      f"slopes {min(slopes):.2f}..{max(slopes):.2f}")
    assert len(res.directions) == 5
    for b in best:
        assert b <= 1e-3
    for s in slopes:
        assert 1.7 <= s <= 2.3
    assert res.passed


def test_criterion_07_time_derivative_consistency():
    grid, tg, data = tanh_problem(n=128, t_end=1.0, n_steps=200)
    obj = tracking_objective(grid)
    u = half_dose(grid, tg)
    traj = solve_state(data, u)
    res = check_dtau_fd(traj, u, obj, nodes=(50, 100, 150))
    rels = [e / max(1.0, abs(v)) for e, v in zip(res.errors, res.values)]
    timed = tracking_objective(grid, betaQ=0.0, betaOmega=0.0, betaS=0.0)
    exact = all(dtau_J(traj, u, timed, k) == timed.betaT for k in (50, 100, 150))
    ok = res.passed and exact
    report("C07", ok, f"interior rel errors {max(rels):.3e} vs 5*dt = "
                      f"{res.tol:.2e}; pure time penalty exact: {exact}")
    assert res.passed
    assert exact


def test_criterion_08_optimizer_certifies_manufactured_preset():
    built = build_problem(resolve_config_arg("preset:manufactured"))
    t0 = time.perf_counter()
    res = optimize(built.data, built.u0, built.obj, built.optimizer,
                   s_stab=built.s_stab)
    elapsed = time.perf_counter() - t0
    hist = np.asarray(res.J_history)
    monotone = bool(np.all(np.diff(hist) <= 0.0))
    ok = (res.status == "converged" and monotone
          and res.fonc.stationarity_u <= 1e-4 and res.fonc.tau_satisfied
          and elapsed <= 300.0)
    report("C08", ok, f"{res.status} in {len(res.iterations)} iterations, "
                      f"J {res.J:.3e}, stationarity {res.fonc.stationarity_u:.3e}, "
                      f"tau node {res.tau_index} ({res.fonc.tau_case}), "
                      f"{elapsed:.1f}s")
    assert res.status == "converged"
    assert monotone
    assert res.fonc.stationarity_u <= 1e-4
    # first-order time condition at the certified tau
    if res.tau_index == 0:
        assert res.fonc.dtau_value >= -res.fonc.tau_tol
    elif res.tau_index == built.timegrid.n_steps:
        assert res.fonc.dtau_value <= res.fonc.tau_tol
    else:
        assert abs(res.fonc.dtau_value) <= res.fonc.tau_tol
    assert elapsed <= 300.0


def test_criterion_09_pure_penalty_optimum_is_trivial():
    grid, tg, data = tanh_problem(n=128, t_end=1.0, n_steps=200)
    obj = tracking_objective(grid, betaQ=0.0, betaOmega=0.0, betaS=0.0)
    res = optimize(data, half_dose(grid, tg), obj,
                   OptimizerConfig(max_outer_iters=50, stationarity_tol=1e-4))
    norm = control_norm(res.u)
    ok = res.status == "converged" and norm <= 1e-6 and res.tau_index == 0
    report("C09", ok, f"{res.status}, ||u*|| = {norm:.3e}, "
                      f"tau* at node {res.tau_index}")
    assert res.status == "converged"
    assert norm <= 1e-6
    assert res.tau_index == 0


CLI_MATRIX = (
    ("simulate", "preset:reference"),
    ("optimize", "preset:manufactured"),
    ("verify", "preset:equilibrium"),
    ("grad-check", "preset:equilibrium"),
)


def read_tree(root):
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_criterion_10_outputs_are_reproducible(tmp_path):
    mismatches = []
    for command, config in CLI_MATRIX:
        runs = []
        for attempt in ("a", "b"):
            out = str(tmp_path / f"{command}-{attempt}")
            rc = cli_main([command, "--config", config, "--out", out])
            runs.append((rc, read_tree(out)))
        (rc_a, tree_a), (rc_b, tree_b) = runs
        if rc_a != rc_b or set(tree_a) != set(tree_b):
            mismatches.append(command)
            continue
        if any(tree_a[p] != tree_b[p] for p in tree_a):
            mismatches.append(command)
    ok = not mismatches
    report("C10", ok, "byte-identical reruns for "
           + ", ".join(c for c, _ in CLI_MATRIX)
           + (f"; mismatches: {mismatches}" if mismatches else ""))
    assert not mismatches
