"""Uniform cell-centered grids on rectangular boxes and scalar fields on them.

All spatial operators assume homogeneous Neumann (zero normal flux)
boundaries, realized through mirror ghost cells. With that choice the
discrete Laplacian is symmetric with exactly zero column sums, so
``integrate(laplacian_neumann(f)) == 0`` holds to rounding and summation
by parts is exact: ``inner_product(-lap f, g) == dirichlet_form(f, g)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError
from . import kernels


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on [0, L_x] (x) [0, L_y].

    Parameters
    ----------
    dim : int
        1 or 2.
    n : tuple of int
        Cells per axis, each >= 4.
    lengths : tuple of float
        Box edge lengths, each > 0.
    """

    dim: int
    n: tuple
    lengths: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = tuple(int(v) for v in self.n)
        lengths = tuple(float(v) for v in self.lengths)
        if len(n) != self.dim or len(lengths) != self.dim:
            raise ValueError("n and lengths must have one entry per axis")
        if any(v < 4 for v in n):
            raise ValueError(f"need at least 4 cells per axis, got {n}")
        if any(v <= 0.0 for v in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "lengths", lengths)

    @property
    def h_cell(self) -> tuple:
        return tuple(L / m for L, m in zip(self.lengths, self.n))

    @property
    def n_cells(self) -> int:
        out = 1
        for m in self.n:
            out *= m
        return out

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for h in self.h_cell:
            vol *= h
        return vol

    @property
    def kernel_meta(self) -> tuple:
        """(dim, nx, ny, 1/hx^2, 1/hy^2) consumed by the stencil kernels."""
        h = self.h_cell
        if self.dim == 1:
            return (1, self.n[0], 1, 1.0 / h[0] ** 2, 0.0)
        return (2, self.n[0], self.n[1], 1.0 / h[0] ** 2, 1.0 / h[1] ** 2)

    def cell_centers(self) -> tuple:
        """Cell-center coordinates, one 1-D array per axis."""
        return tuple(
            (np.arange(m, dtype=np.float64) + 0.5) * (L / m)
            for m, L in zip(self.n, self.lengths))

    def meshgrid(self) -> tuple:
        """Cell-center coordinate arrays shaped like the cell layout."""
        axes = self.cell_centers()
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(axes[0], axes[1], indexing="ij"))


@dataclass(frozen=True)
class ScalarField:
    """One float64 value per cell, row-major, immutable.

    The values array is flagged read-only on construction; operations
    return new fields rather than mutating.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.grid.n_cells:
            raise GridMismatchError(
                f"field has {v.size} values for a grid of {self.grid.n_cells} cells")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def as_nd(self) -> np.ndarray:
        """Values reshaped to the cell layout (read-only view)."""
        return self.values.reshape(self.grid.n)


def const_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.n_cells, float(value)))


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample fn at cell centers. fn takes one coordinate array per axis."""
    return ScalarField(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64).reshape(-1))


def check_same_grid(*fields) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError("fields live on different grids")
    return g


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """Five-point (three-point in 1-D) Laplacian with mirror ghost cells."""
    out = kernels.laplacian_apply(f.values, f.grid.kernel_meta)
    return ScalarField(f.grid, out)


def integrate(f: ScalarField) -> float:
    """Cell-midpoint quadrature: cell volume times the sum of values."""
    return f.grid.cell_volume * float(np.sum(f.values))


def inner_product(f: ScalarField, g: ScalarField) -> float:
    """L2 pairing under the same midpoint rule."""
    check_same_grid(f, g)
    return f.grid.cell_volume * float(np.dot(f.values, g.values))


def l2_norm(f: ScalarField) -> float:
    return np.sqrt(max(inner_product(f, f), 0.0))


def dirichlet_form(f: ScalarField, g: ScalarField) -> float:
    """Discrete int grad f . grad g via face differences.

    Matches the Laplacian exactly: dirichlet_form(f, g) ==
    inner_product(-laplacian_neumann(f), g) to rounding.
    """
    check_same_grid(f, g)
    grid = f.grid
    h = grid.h_cell
    a = f.as_nd()
    b = g.as_nd()
    vol = grid.cell_volume
    total = 0.0
    if grid.dim == 1:
        total += float(np.sum(np.diff(a) * np.diff(b))) / h[0] ** 2 * vol
    else:
        total += float(np.sum(np.diff(a, axis=0) * np.diff(b, axis=0))) / h[0] ** 2 * vol
        total += float(np.sum(np.diff(a, axis=1) * np.diff(b, axis=1))) / h[1] ** 2 * vol
    return total


def grad_sq_norm(f: ScalarField) -> float:
    """Discrete H1 seminorm squared, int |grad f|^2."""
    return dirichlet_form(f, f)


def h1_norm_sq(f: ScalarField) -> float:
    return inner_product(f, f) + grad_sq_norm(f)


def restrict_to_coarse(f: ScalarField, coarse: Grid) -> ScalarField:
    """Block-average a field onto a coarser grid with the same box.

    Each coarse axis size must divide the fine one; cell averaging is the
    natural (second-order) restriction between cell-centered grids.
    """
    if f.grid.lengths != coarse.lengths or f.grid.dim != coarse.dim:
        raise GridMismatchError("restriction requires the same box")
    ratios = []
    for fine_n, coarse_n in zip(f.grid.n, coarse.n):
        if fine_n % coarse_n:
            raise GridMismatchError(
                f"fine cells {fine_n} not a multiple of coarse cells {coarse_n}")
        ratios.append(fine_n // coarse_n)
    a = f.as_nd()
    if f.grid.dim == 1:
        out = a.reshape(coarse.n[0], ratios[0]).mean(axis=1)
    else:
        out = a.reshape(coarse.n[0], ratios[0], coarse.n[1], ratios[1]).mean(axis=(1, 3))
    return ScalarField(coarse, out.reshape(-1))
