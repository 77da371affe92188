"""Shared problem builders for the test suite.

Small 1-D problems sized so every module test runs in well under a second;
the acceptance tests build their own frozen configurations.
"""
import math

from chemodose import (Grid, ModelParams, ObjectiveSpec, ProblemData, TimeGrid,
                       const_field)
from chemodose.config import _tanh_seed
from chemodose.model import default_interpolant, default_potential
from chemodose.timegrid import const_control


def tanh_problem(n: int = 32, t_end: float = 0.25, n_steps: int = 40,
                 length: float = 1.0, params: ModelParams | None = None,
                 radius: float = 0.25):
    """Tumor seed in host tissue with saturated nutrient."""
    params = params if params is not None else ModelParams()
    grid = Grid(1, (n,), (length,))
    tg = TimeGrid(t_end, n_steps)
    phi0 = _tanh_seed(grid, radius, math.sqrt(params.B / params.A))
    data = ProblemData(phi0, const_field(grid, 1.0), const_field(grid, 1.0),
                       params, default_potential(), default_interpolant())
    return grid, tg, data


def equilibrium_problem(n: int = 16, t_end: float = 0.1, n_steps: int = 10):
    """phi = -1 everywhere and sigma = sigma_S = 1: an exact steady state."""
    grid = Grid(1, (n,), (1.0,))
    tg = TimeGrid(t_end, n_steps)
    data = ProblemData(const_field(grid, -1.0), const_field(grid, 1.0),
                       const_field(grid, 1.0), ModelParams(),
                       default_potential(), default_interpolant())
    return grid, tg, data


def tracking_objective(grid: Grid, betaQ: float = 1.0, betaOmega: float = 0.5,
                       betaS: float = 0.1, betaU: float = 0.1,
                       betaT: float = 0.05, r_relax: float = 0.05,
                       target: float = -1.0) -> ObjectiveSpec:
    return ObjectiveSpec(betaQ=betaQ, betaOmega=betaOmega, betaS=betaS,
                         betaU=betaU, betaT=betaT, r_relax=r_relax,
                         phiQ=const_field(grid, target),
                         phiOmega=const_field(grid, target))


def half_dose(grid: Grid, tg: TimeGrid):
    return const_control(grid, tg, 0.5)
