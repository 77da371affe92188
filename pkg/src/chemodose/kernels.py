"""Hot numeric kernels: stencil application and matrix-free linear solves.

Two interchangeable backends compute identical quantities:

* ``numba``  -- @njit compiled loops (default when numba imports cleanly),
* ``numpy``  -- pure vectorized twins.

Selection: environment variable ``CHEMODOSE_NUMBA=0`` forces the numpy
path; otherwise numba is used when available. ``set_backend()`` overrides
at runtime (used by the equivalence tests and the benchmark).

Every solver is matrix-free on the mirror-ghost Neumann Laplacian and
returns ``(x, iterations, relative_residual)`` with the true residual
recomputed at exit; callers decide whether to raise. Reductions run in a
fixed order, so results are reproducible bit-for-bit per backend.

All arrays are flat float64, row-major; ``meta = (dim, nx, ny, ihx2, ihy2)``
describes the grid.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return deco

_env = os.environ.get("CHEMODOSE_NUMBA", "1")
_BACKEND = "numba" if (HAVE_NUMBA and _env != "0") else "numpy"

_threads = os.environ.get("CHEMODOSE_THREADS")
if _threads and HAVE_NUMBA:
    try:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
    except (ValueError, RuntimeError):
        pass


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _BACKEND = name


def get_backend() -> str:
    return _BACKEND


# ----------------------------------------------------------------------
# numba path
# ----------------------------------------------------------------------

@njit(cache=True)
def _lap_nb(f, out, dim, nx, ny, ihx2, ihy2):
    if dim == 1:
        out[0] = (f[1] - f[0]) * ihx2
        for i in range(1, nx - 1):
            out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * ihx2
        out[nx - 1] = (f[nx - 2] - f[nx - 1]) * ihx2
    else:
        for i in range(nx):
            for j in range(ny):
                c = f[i * ny + j]
                xm = f[(i - 1) * ny + j] if i > 0 else c
                xp = f[(i + 1) * ny + j] if i < nx - 1 else c
                ym = f[i * ny + j - 1] if j > 0 else c
                yp = f[i * ny + j + 1] if j < ny - 1 else c
                out[i * ny + j] = (xm - 2.0 * c + xp) * ihx2 + (ym - 2.0 * c + yp) * ihy2


@njit(cache=True)
def _dot_nb(a, b):
    s = 0.0
    for i in range(a.size):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def _cg_rd_nb(b, x0, cdiag, dt, dim, nx, ny, ihx2, ihy2, tol, maxiter):
    # (I - dt*Lap + dt*diag(cdiag)) x = b
    n = b.size
    x = x0.copy()
    tmp = np.empty(n)
    ax = np.empty(n)
    r = np.empty(n)
    p = np.empty(n)
    ap = np.empty(n)
    bnorm = np.sqrt(_dot_nb(b, b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    _lap_nb(x, tmp, dim, nx, ny, ihx2, ihy2)
    for i in range(n):
        ax[i] = x[i] - dt * tmp[i] + dt * cdiag[i] * x[i]
        r[i] = b[i] - ax[i]
        p[i] = r[i]
    rs = _dot_nb(r, r)
    k = 0
    while np.sqrt(rs) > tol * bnorm and k < maxiter:
        _lap_nb(p, tmp, dim, nx, ny, ihx2, ihy2)
        for i in range(n):
            ap[i] = p[i] - dt * tmp[i] + dt * cdiag[i] * p[i]
        pap = _dot_nb(p, ap)
        alpha = rs / pap
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
        rs_new = _dot_nb(r, r)
        beta = rs_new / rs
        rs = rs_new
        for i in range(n):
            p[i] = r[i] + beta * p[i]
        k += 1
    # true residual
    _lap_nb(x, tmp, dim, nx, ny, ihx2, ihy2)
    res = 0.0
    for i in range(n):
        d = b[i] - (x[i] - dt * tmp[i] + dt * cdiag[i] * x[i])
        res += d * d
    return x, k, np.sqrt(res) / bnorm


@njit(cache=True)
def _cg_schur_nb(b, x0, c1, c2, dim, nx, ny, ihx2, ihy2, tol, maxiter):
    # (I + c1*(-Lap) + c2*Lap^2) x = b
    n = b.size
    x = x0.copy()
    l1 = np.empty(n)
    l2 = np.empty(n)
    ax = np.empty(n)
    r = np.empty(n)
    p = np.empty(n)
    ap = np.empty(n)
    bnorm = np.sqrt(_dot_nb(b, b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    _lap_nb(x, l1, dim, nx, ny, ihx2, ihy2)
    _lap_nb(l1, l2, dim, nx, ny, ihx2, ihy2)
    for i in range(n):
        ax[i] = x[i] - c1 * l1[i] + c2 * l2[i]
        r[i] = b[i] - ax[i]
        p[i] = r[i]
    rs = _dot_nb(r, r)
    k = 0
    while np.sqrt(rs) > tol * bnorm and k < maxiter:
        _lap_nb(p, l1, dim, nx, ny, ihx2, ihy2)
        _lap_nb(l1, l2, dim, nx, ny, ihx2, ihy2)
        for i in range(n):
            ap[i] = p[i] - c1 * l1[i] + c2 * l2[i]
        pap = _dot_nb(p, ap)
        alpha = rs / pap
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
        rs_new = _dot_nb(r, r)
        beta = rs_new / rs
        rs = rs_new
        for i in range(n):
            p[i] = r[i] + beta * p[i]
        k += 1
    _lap_nb(x, l1, dim, nx, ny, ihx2, ihy2)
    _lap_nb(l1, l2, dim, nx, ny, ihx2, ihy2)
    res = 0.0
    for i in range(n):
        d = b[i] - (x[i] - c1 * l1[i] + c2 * l2[i])
        res += d * d
    return x, k, np.sqrt(res) / bnorm


@njit(cache=True)
def _apply_adjphase_nb(x, out, a, d, c2, dim, nx, ny, ihx2, ihy2, l1, l2):
    # out = x + c2*Lap^2 x - a .* Lap x - d .* x
    _lap_nb(x, l1, dim, nx, ny, ihx2, ihy2)
    _lap_nb(l1, l2, dim, nx, ny, ihx2, ihy2)
    for i in range(x.size):
        out[i] = x[i] + c2 * l2[i] - a[i] * l1[i] - d[i] * x[i]


@njit(cache=True)
def _bicgstab_adjphase_nb(b, x0, a, d, c2, dim, nx, ny, ihx2, ihy2, tol, maxiter):
    n = b.size
    x = x0.copy()
    l1 = np.empty(n)
    l2 = np.empty(n)
    r = np.empty(n)
    v = np.zeros(n)
    p = np.zeros(n)
    s = np.empty(n)
    t = np.empty(n)
    bnorm = np.sqrt(_dot_nb(b, b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    _apply_adjphase_nb(x, r, a, d, c2, dim, nx, ny, ihx2, ihy2, l1, l2)
    for i in range(n):
        r[i] = b[i] - r[i]
    rhat = r.copy()
    rho = 1.0
    alpha = 1.0
    omega = 1.0
    k = 0
    rn = np.sqrt(_dot_nb(r, r))
    while rn > tol * bnorm and k < maxiter:
        rho_new = _dot_nb(rhat, r)
        if abs(rho_new) < 1e-300 or abs(omega) < 1e-300:
            break  # breakdown; report true residual below
        beta = (rho_new / rho) * (alpha / omega)
        for i in range(n):
            p[i] = r[i] + beta * (p[i] - omega * v[i])
        _apply_adjphase_nb(p, v, a, d, c2, dim, nx, ny, ihx2, ihy2, l1, l2)
        den = _dot_nb(rhat, v)
        if abs(den) < 1e-300:
            break
        alpha = rho_new / den
        for i in range(n):
            s[i] = r[i] - alpha * v[i]
        sn = np.sqrt(_dot_nb(s, s))
        if sn <= tol * bnorm:
            for i in range(n):
                x[i] += alpha * p[i]
            rho = rho_new
            k += 1
            rn = sn
            break
        _apply_adjphase_nb(s, t, a, d, c2, dim, nx, ny, ihx2, ihy2, l1, l2)
        tt = _dot_nb(t, t)
        if tt < 1e-300:
            break
        omega = _dot_nb(t, s) / tt
        for i in range(n):
            x[i] += alpha * p[i] + omega * s[i]
            r[i] = s[i] - omega * t[i]
        rho = rho_new
        rn = np.sqrt(_dot_nb(r, r))
        k += 1
    _apply_adjphase_nb(x, t, a, d, c2, dim, nx, ny, ihx2, ihy2, l1, l2)
    res = 0.0
    for i in range(n):
        dd = b[i] - t[i]
        res += dd * dd
    return x, k, np.sqrt(res) / bnorm


# ----------------------------------------------------------------------
# numpy path
# ----------------------------------------------------------------------

def _lap_np(f, meta):
    dim, nx, ny, ihx2, ihy2 = meta
    if dim == 1:
        out = np.empty_like(f)
        out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) * ihx2
        out[0] = (f[1] - f[0]) * ihx2
        out[-1] = (f[-2] - f[-1]) * ihx2
        return out
    g = f.reshape(nx, ny)
    out = np.empty_like(g)
    out[1:-1, :] = (g[:-2, :] - 2.0 * g[1:-1, :] + g[2:, :]) * ihx2
    out[0, :] = (g[1, :] - g[0, :]) * ihx2
    out[-1, :] = (g[-2, :] - g[-1, :]) * ihx2
    out[:, 1:-1] += (g[:, :-2] - 2.0 * g[:, 1:-1] + g[:, 2:]) * ihy2
    out[:, 0] += (g[:, 1] - g[:, 0]) * ihy2
    out[:, -1] += (g[:, -2] - g[:, -1]) * ihy2
    return out.reshape(-1)


def _cg_np(apply_op, b, x0, tol, maxiter):
    bnorm = float(np.sqrt(np.dot(b, b)))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = x0.copy()
    r = b - apply_op(x)
    p = r.copy()
    rs = float(np.dot(r, r))
    k = 0
    while np.sqrt(rs) > tol * bnorm and k < maxiter:
        ap = apply_op(p)
        alpha = rs / float(np.dot(p, ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.dot(r, r))
        beta = rs_new / rs
        rs = rs_new
        p = r + beta * p
        k += 1
    res = float(np.linalg.norm(b - apply_op(x)))
    return x, k, res / bnorm


def _bicgstab_np(apply_op, b, x0, tol, maxiter):
    bnorm = float(np.sqrt(np.dot(b, b)))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = x0.copy()
    r = b - apply_op(x)
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    k = 0
    rn = float(np.linalg.norm(r))
    while rn > tol * bnorm and k < maxiter:
        rho_new = float(np.dot(rhat, r))
        if abs(rho_new) < 1e-300 or abs(omega) < 1e-300:
            break
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        v = apply_op(p)
        den = float(np.dot(rhat, v))
        if abs(den) < 1e-300:
            break
        alpha = rho_new / den
        s = r - alpha * v
        sn = float(np.linalg.norm(s))
        if sn <= tol * bnorm:
            x += alpha * p
            rho = rho_new
            k += 1
            break
        t = apply_op(s)
        tt = float(np.dot(t, t))
        if tt < 1e-300:
            break
        omega = float(np.dot(t, s)) / tt
        x += alpha * p + omega * s
        r = s - omega * t
        rho = rho_new
        rn = float(np.linalg.norm(r))
        k += 1
    res = float(np.linalg.norm(b - apply_op(x)))
    return x, k, res / bnorm


# ----------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------

def laplacian_apply(f: np.ndarray, meta: tuple) -> np.ndarray:
    if _BACKEND == "numba":
        out = np.empty_like(f)
        _lap_nb(f, out, *meta)
        return out
    return _lap_np(f, meta)


def solve_reaction_diffusion(b, x0, cdiag, dt, meta, tol, maxiter):
    """Solve (I - dt*Lap + dt*diag(cdiag)) x = b. SPD for cdiag >= 0."""
    if _BACKEND == "numba":
        return _cg_rd_nb(b, x0, cdiag, dt, *meta, tol, maxiter)

    def apply_op(x):
        return x - dt * _lap_np(x, meta) + dt * cdiag * x

    return _cg_np(apply_op, b, x0, tol, maxiter)


def solve_phase_schur(b, x0, c1, c2, meta, tol, maxiter):
    """Solve (I + c1*(-Lap) + c2*Lap^2) x = b. SPD for c1, c2 >= 0."""
    if _BACKEND == "numba":
        return _cg_schur_nb(b, x0, c1, c2, *meta, tol, maxiter)

    def apply_op(x):
        l1 = _lap_np(x, meta)
        return x - c1 * l1 + c2 * _lap_np(l1, meta)

    return _cg_np(apply_op, b, x0, tol, maxiter)


def solve_adjoint_phase(b, x0, a, d, c2, meta, tol, maxiter):
    """Solve (I + c2*Lap^2 - diag(a)*Lap - diag(d)) x = b.

    The diag(a)*Lap term is nonsymmetric, so this runs BiCGStab rather
    than CG.
    """
    if _BACKEND == "numba":
        return _bicgstab_adjphase_nb(b, x0, a, d, c2, *meta, tol, maxiter)

    def apply_op(x):
        l1 = _lap_np(x, meta)
        return x + c2 * _lap_np(l1, meta) - a * l1 - d * x

    return _bicgstab_np(apply_op, b, x0, tol, maxiter)
