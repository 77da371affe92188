"""Uniform time grids and piecewise-constant-in-time controls.

A control stores one spatial frame per time node; frame k acts on
[t_k, t_{k+1}), so the last frame never drives the dynamics. It still
participates in the trapezoid time quadrature used for all L2(Q)
pairings of control-shaped objects, which keeps those pairings the exact
derivatives of the trapezoid integrals in the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError
from .grid import Grid, ScalarField, check_same_grid, inner_product, const_field


@dataclass(frozen=True)
class TimeGrid:
    """n_steps uniform steps covering [0, t_end]."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one step, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def t(self, k: int) -> float:
        return k * self.dt

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes, dtype=np.float64) * self.dt

    def window_steps(self, r_relax: float, rel_tol: float = 1e-9) -> int:
        """r_relax as a whole number of steps; raises if it is not one."""
        m = int(round(r_relax / self.dt))
        if m < 1 or abs(m * self.dt - r_relax) > rel_tol * max(r_relax, self.dt):
            raise ValueError(
                f"r_relax = {r_relax} is not a positive multiple of dt = {self.dt}")
        return m


@dataclass(frozen=True)
class Control:
    """One ScalarField per time node, constant on each step interval."""

    timegrid: TimeGrid
    frames: tuple = field(repr=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) != self.timegrid.n_nodes:
            raise GridMismatchError(
                f"control has {len(frames)} frames for {self.timegrid.n_nodes} nodes")
        check_same_grid(*frames)
        object.__setattr__(self, "frames", frames)

    @property
    def grid(self) -> Grid:
        return self.frames[0].grid

    def values_matrix(self) -> np.ndarray:
        """(n_nodes, n_cells) array of frame values."""
        return np.stack([f.values for f in self.frames])


def const_control(grid: Grid, timegrid: TimeGrid, value: float) -> Control:
    f = const_field(grid, value)
    return Control(timegrid, (f,) * timegrid.n_nodes)


def control_from_matrix(grid: Grid, timegrid: TimeGrid, mat: np.ndarray) -> Control:
    return Control(timegrid, tuple(ScalarField(grid, row) for row in mat))


def project_admissible(u: Control, lower: float = 0.0, upper: float = 1.0) -> Control:
    """Pointwise clamp onto [lower, upper]; idempotent and 1-Lipschitz."""
    if lower > upper:
        raise ValueError(f"empty admissible box [{lower}, {upper}]")
    frames = tuple(ScalarField(u.grid, np.clip(f.values, lower, upper))
                   for f in u.frames)
    return Control(u.timegrid, frames)


def _trapz_weights(n_nodes: int, dt: float) -> np.ndarray:
    w = np.full(n_nodes, dt)
    w[0] = 0.5 * dt
    w[-1] = 0.5 * dt
    return w


def control_inner(a: Control, b: Control) -> float:
    """L2(Q) pairing: trapezoid in time, cell quadrature in space."""
    if a.timegrid != b.timegrid:
        raise GridMismatchError("controls live on different time grids")
    w = _trapz_weights(a.timegrid.n_nodes, a.timegrid.dt)
    total = 0.0
    for k in range(a.timegrid.n_nodes):
        total += w[k] * inner_product(a.frames[k], b.frames[k])
    return total


def control_norm(a: Control) -> float:
    return np.sqrt(max(control_inner(a, a), 0.0))


def control_axpy(a: Control, coef: float, b: Control) -> Control:
    """a + coef * b, frame by frame."""
    if a.timegrid != b.timegrid:
        raise GridMismatchError("controls live on different time grids")
    grid = check_same_grid(a.frames[0], b.frames[0])
    frames = tuple(ScalarField(grid, fa.values + coef * fb.values)
                   for fa, fb in zip(a.frames, b.frames))
    return Control(a.timegrid, frames)
