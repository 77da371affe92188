"""On-disk formats: FIELD v1 snapshots, CSV series and run manifests.

FIELD v1 is one ASCII header line

    FIELD v1 <dim> <n_x> [<n_y>] <L_x> [<L_y>]\n

followed by the cell values as little-endian IEEE 754 binary64 in
row-major order. CSV floats are written with %.17g, which round-trips
float64 exactly and keeps outputs byte-stable for identical inputs.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .grid import Grid, ScalarField, integrate, l2_norm
from .state import ProblemData, StateTrajectory, energy, residual_report, trajectory_series

MAGIC = "FIELD v1"


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_field(path: str, f: ScalarField) -> None:
    g = f.grid
    parts = [MAGIC, str(g.dim)] + [str(m) for m in g.n] + [fmt(L) for L in g.lengths]
    with open(path, "wb") as fh:
        fh.write((" ".join(parts) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path: str) -> ScalarField:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        tokens = header.split()
        if len(tokens) < 2 or " ".join(tokens[:2]) != MAGIC:
            raise ValueError(f"{path}: not a {MAGIC} file (header {header!r})")
        try:
            dim = int(tokens[2])
            rest = tokens[3:]
            n = tuple(int(v) for v in rest[:dim])
            lengths = tuple(float(v) for v in rest[dim:2 * dim])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: malformed {MAGIC} header {header!r}") from exc
        if len(rest) != 2 * dim:
            raise ValueError(f"{path}: header has {len(rest)} fields, expected {2 * dim}")
        grid = Grid(dim, n, lengths)
        raw = fh.read()
    expect = 8 * grid.n_cells
    if len(raw) != expect:
        raise ValueError(f"{path}: payload is {len(raw)} bytes, expected {expect}")
    return ScalarField(grid, np.frombuffer(raw, dtype="<f8").astype(np.float64))


def write_values_csv(path: str, f: ScalarField) -> None:
    """One value per line, for diffing."""
    with open(path, "w") as fh:
        for v in f.values:
            fh.write(fmt(v) + "\n")


def write_csv(path: str, header: list, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_manifest(path: str, entries: dict) -> None:
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key} = {entries[key]}\n")


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _snap(outdir: str, prefix: str, k: int, f: ScalarField) -> None:
    write_field(os.path.join(outdir, f"{prefix}_{k:06d}.f64"), f)


def export_state(outdir: str, traj: StateTrajectory, data: ProblemData, u,
                 snapshot_every: int = 1) -> None:
    os.makedirs(outdir, exist_ok=True)
    write_csv(os.path.join(outdir, "series.csv"),
              ["k", "t", "mass_phi", "mass_sigma", "energy", "min_sigma", "max_sigma"],
              trajectory_series(traj, data))
    rep = residual_report(traj, data, u)
    rows = [(k, traj.timegrid.t(k + 1), rep.mass_phi_residual[k],
             rep.mass_sigma_residual[k], rep.energy_increment[k])
            for k in range(traj.timegrid.n_steps)]
    write_csv(os.path.join(outdir, "residuals.csv"),
              ["step", "t_next", "mass_phi_residual", "mass_sigma_residual",
               "energy_increment"], rows)
    if snapshot_every > 0:
        for k in range(0, traj.timegrid.n_nodes, snapshot_every):
            _snap(outdir, "phi", k, traj.phi[k])
            _snap(outdir, "mu", k, traj.mu[k])
            _snap(outdir, "sigma", k, traj.sigma[k])


def export_linearized(outdir: str, lin, snapshot_every: int = 1) -> None:
    os.makedirs(outdir, exist_ok=True)
    rows = [(k, lin.timegrid.t(k), l2_norm(lin.phi[k]), l2_norm(lin.xi[k]),
             l2_norm(lin.sigma[k])) for k in range(lin.timegrid.n_nodes)]
    write_csv(os.path.join(outdir, "linearized_series.csv"),
              ["k", "t", "norm_Phi", "norm_Xi", "norm_Sigma"], rows)
    if snapshot_every > 0:
        for k in range(0, lin.timegrid.n_nodes, snapshot_every):
            _snap(outdir, "Phi", k, lin.phi[k])
            _snap(outdir, "Xi", k, lin.xi[k])
            _snap(outdir, "Sigma", k, lin.sigma[k])


def export_adjoint(outdir: str, adj, snapshot_every: int = 1) -> None:
    os.makedirs(outdir, exist_ok=True)
    rows = [(k, adj.timegrid.t(k), l2_norm(adj.p[k]), l2_norm(adj.q[k]),
             l2_norm(adj.r_adj[k])) for k in range(adj.tau_index + 1)]
    write_csv(os.path.join(outdir, "adjoint_series.csv"),
              ["k", "t", "norm_p", "norm_q", "norm_radj"], rows)
    if snapshot_every > 0:
        for k in range(0, adj.tau_index + 1, snapshot_every):
            _snap(outdir, "p", k, adj.p[k])
            _snap(outdir, "q", k, adj.q[k])
            _snap(outdir, "radj", k, adj.r_adj[k])


def export_optimization(outdir: str, result, snapshot_every: int = 1) -> None:
    os.makedirs(outdir, exist_ok=True)
    tg = result.u.timegrid
    it_rows = []
    obj_rows = []
    for rec in result.iterations:
        it_rows.append((rec.outer, rec.J, rec.stationarity_u, rec.tau_index,
                        tg.t(rec.tau_index), rec.step, rec.armijo_shrinks))
        t = rec.terms
        obj_rows.append((rec.outer, rec.J, t["term_Q"], t["term_Omega"], t["term_S"],
                         t["term_u"], t["term_T"], rec.stationarity_u, rec.dtau_value,
                         rec.tau_index, tg.t(rec.tau_index)))
    write_csv(os.path.join(outdir, "iterations.csv"),
              ["iter", "J", "stationarity_u", "tau_index", "tau", "step",
               "armijo_shrinks"], it_rows)
    write_csv(os.path.join(outdir, "objective.csv"),
              ["iter", "J", "term_Q", "term_Omega", "term_S", "term_u", "term_T",
               "stationarity_u", "dtau_value", "tau_index", "tau"], obj_rows)
    if snapshot_every > 0:
        for k in range(0, tg.n_nodes, snapshot_every):
            _snap(outdir, "u", k, result.u.frames[k])
