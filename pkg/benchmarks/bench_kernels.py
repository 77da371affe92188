"""Timing comparison of the numba and numpy kernel backends.

Runs the three linear solves and the stencil on representative grids and
prints a table of per-call times plus the speedup. The first numba call
per kernel is a JIT compile and is excluded by a warmup pass.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--quick]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from chemodose.grid import Grid
from chemodose import kernels


def _problem(grid: Grid, dt: float, rng: np.random.Generator):
    # coefficient fields shaped like one real implicit step: psi''-type
    # term and reaction terms enter through dt, so the operators stay a
    # compact perturbation of the identity, as in the solvers' hot loop
    n = grid.n_cells
    x = rng.uniform(-1.0, 1.0, n)
    b = rng.uniform(-1.0, 1.0, n)
    cdiag = rng.uniform(0.5, 2.0, n)
    phi = rng.uniform(-1.0, 1.0, n)
    a = dt * (3.0 * phi * phi - 1.0)
    d = dt * rng.uniform(-1.0, 1.0, n)
    return x, b, cdiag, a, d


def _time(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(grid: Grid, dt: float, repeat: int, rng: np.random.Generator):
    meta = grid.kernel_meta
    maxiter = 10 * grid.n_cells
    x, b, cdiag, a, d = _problem(grid, dt, rng)
    c1 = dt * 2.0                           # dt * A * s_stab
    c2 = dt * 1e-3                          # dt * B

    cases = {
        "laplacian": lambda: kernels.laplacian_apply(b, meta),
        "reaction_diffusion": lambda: kernels.solve_reaction_diffusion(
            b, x, cdiag, dt, meta, 1e-11, maxiter),
        "phase_schur": lambda: kernels.solve_phase_schur(
            b, x, c1, c2, meta, 1e-11, maxiter),
        "adjoint_phase": lambda: kernels.solve_adjoint_phase(
            b, x, a, d, c2, meta, 1e-11, maxiter),
    }

    rows = []
    for name, fn in cases.items():
        times = {}
        values = {}
        for backend in ("numba", "numpy"):
            if backend == "numba" and not kernels.HAVE_NUMBA:
                times[backend] = math.nan
                continue
            kernels.set_backend(backend)
            out = fn()   # warmup; compiles on first numba call
            values[backend] = out[0] if isinstance(out, tuple) else out
            times[backend] = _time(fn, repeat)
        if len(values) == 2:
            ref = np.linalg.norm(values["numpy"]) or 1.0
            dev = np.linalg.norm(values["numba"] - values["numpy"]) / ref
        else:
            dev = math.nan
        rows.append((name, times.get("numba", math.nan), times["numpy"], dev))
    return rows


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7, help="timing repeats, best kept")
    ap.add_argument("--quick", action="store_true", help="small grids only")
    args = ap.parse_args()

    grids = [Grid(1, (256,), (1.0,)), Grid(2, (64, 64), (1.0, 1.0))]
    if not args.quick:
        grids.append(Grid(2, (128, 128), (1.0, 1.0)))

    rng = np.random.default_rng(0)
    print(f"{'grid':>10} {'kernel':>20} {'numba':>10} {'numpy':>10} "
          f"{'speedup':>8} {'rel dev':>9}")
    for grid in grids:
        label = "x".join(str(m) for m in grid.n)
        for name, tb, tn, dev in bench(grid, 1e-3, args.repeat, rng):
            speed = tn / tb if tb == tb and tb > 0 else math.nan
            print(f"{label:>10} {name:>20} {tb*1e3:9.3f}ms {tn*1e3:9.3f}ms "
                  f"{speed:7.1f}x {dev:9.2e}")
    kernels.set_backend("numba" if kernels.HAVE_NUMBA else "numpy")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
