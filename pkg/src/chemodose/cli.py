"""Command line front end.

Subcommands: simulate, optimize, verify, grad-check. Every command takes
--config (a path or preset:<name>) and --out (output directory). Exit
codes: 0 success, 1 a certification check failed or the optimizer could
not certify its final iterate, 2 bad usage or configuration, 3 the solver
itself broke down. Outputs are deterministic for a fixed config and seed;
no clocks, hostnames or process ids are written.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__, fieldio
from .config import BuiltProblem, build_problem, resolve_config_arg
from .errors import ConfigError, DivergenceError, LinearSolverError
from .kernels import get_backend
from .objective import eval_Jr_terms_nodes
from .optimizer import optimize
from .state import solve_state
from .verification import (SABOTAGE_TARGETS, check_dtau_fd, check_gradient_fd,
                           report_rows, run_verification)

fmt = fieldio.fmt


def _base_manifest(command: str, built: BuiltProblem, seed: int) -> dict:
    return {
        "command": command,
        "version": __version__,
        "backend": get_backend(),
        "config_sha256": fieldio.config_digest(built.config_text),
        "seed": seed,
        "grid_dim": built.grid.dim,
        "grid_n": "x".join(str(m) for m in built.grid.n),
        "t_end": fmt(built.timegrid.t_end),
        "n_steps": built.timegrid.n_steps,
    }


def _cmd_simulate(built: BuiltProblem, out: str, seed: int, args) -> int:
    traj = solve_state(built.data, built.u0, s_stab=built.s_stab)
    fieldio.export_state(out, traj, built.data, built.u0,
                         snapshot_every=built.snapshot_every)
    man = _base_manifest("simulate", built, seed)
    terms = eval_Jr_terms_nodes(traj, built.u0, built.obj)
    man["J_at_t_end"] = fmt(terms["total"][-1])
    fieldio.write_manifest(os.path.join(out, "manifest.txt"), man)
    print(f"simulate: {built.timegrid.n_steps} steps on {man['grid_n']} cells, "
          f"series.csv written to {out}")
    return 0


def _cmd_optimize(built: BuiltProblem, out: str, seed: int, args) -> int:
    import dataclasses
    cfg = dataclasses.replace(built.optimizer, seed=seed,
                              include_control_term=args.include_btau_term)
    result = optimize(built.data, built.u0, built.obj, cfg, s_stab=built.s_stab)
    fieldio.export_optimization(out, result, snapshot_every=built.snapshot_every)
    fieldio.export_state(os.path.join(out, "final_state"), result.trajectory,
                         built.data, result.u, snapshot_every=built.snapshot_every)
    man = _base_manifest("optimize", built, seed)
    man.update({
        "status": result.status,
        "J": fmt(result.J),
        "tau_index": result.tau_index,
        "tau": fmt(result.u.timegrid.t(result.tau_index)),
        "stationarity_u": fmt(result.fonc.stationarity_u),
        "dtau_value": fmt(result.fonc.dtau_value),
        "tau_case": result.fonc.tau_case,
        "outer_iterations": len(result.iterations),
    })
    fieldio.write_manifest(os.path.join(out, "manifest.txt"), man)
    print(f"optimize: status {result.status}, J {fmt(result.J)}, "
          f"tau node {result.tau_index}, "
          f"stationarity {fmt(result.fonc.stationarity_u)}")
    return 0 if result.status == "converged" else 1


def _cmd_verify(built: BuiltProblem, out: str, seed: int, args) -> int:
    report = run_verification(built.data, built.obj, built.u0,
                              factory=built.factory, level=built.verify_level,
                              sabotage=args.sabotage, seed=seed,
                              s_stab=built.s_stab)
    fieldio.write_csv(os.path.join(out, "verification_report.csv"),
                      ["check", "metric", "value", "tolerance", "comparator",
                       "status", "note"], report_rows(report))
    man = _base_manifest("verify", built, seed)
    man["level"] = built.verify_level
    man["sabotage"] = args.sabotage or "none"
    man["checks_passed"] = sum(r.passed for r in report.rows)
    man["checks_total"] = len(report.rows)
    man["result"] = "pass" if report.passed else "FAIL"
    fieldio.write_manifest(os.path.join(out, "manifest.txt"), man)
    for row in report.rows:
        print(f"{'pass' if row.passed else 'FAIL'}  {row.check}.{row.metric} "
              f"= {fmt(row.value)} (want {row.comparator} {fmt(row.tolerance)})")
    print(f"verify: {man['checks_passed']}/{man['checks_total']} checks passed")
    return 0 if report.passed else 1


def _cmd_grad_check(built: BuiltProblem, out: str, seed: int, args) -> int:
    n = built.timegrid.n_steps
    tau_index = args.tau_index if args.tau_index is not None else max(1, (3 * n) // 4)
    if not 0 <= tau_index <= n:
        print(f"grad-check: tau index {tau_index} outside 0..{n}", file=sys.stderr)
        return 2
    res = check_gradient_fd(built.data, built.u0, built.obj, tau_index,
                            seed=seed, s_stab=built.s_stab)
    rows = []
    for i, d in enumerate(res.directions):
        for eps, fd, rel in zip(d.eps, d.fd, d.rel_err):
            rows.append((i, eps, fd, d.pairing, rel, d.slope))
    fieldio.write_csv(os.path.join(out, "gradcheck.csv"),
                      ["direction", "eps", "fd_value", "pairing_value",
                       "rel_err", "slope"], rows)
    traj = solve_state(built.data, built.u0, s_stab=built.s_stab)
    dres = check_dtau_fd(traj, built.u0, built.obj,
                         include_control_term=args.include_btau_term)
    fieldio.write_csv(os.path.join(out, "dtaucheck.csv"),
                      ["node", "dtau_value", "fd_value", "abs_err"],
                      zip(dres.nodes, dres.values, dres.fd_values, dres.errors))
    man = _base_manifest("grad-check", built, seed)
    man["tau_index"] = tau_index
    man["best_rel_err"] = fmt(res.best_rel_err)
    man["dtau_consistent"] = "pass" if dres.passed else "FAIL"
    man["include_btau_term"] = str(args.include_btau_term).lower()
    man["result"] = "pass" if (res.passed and dres.passed) else "FAIL"
    fieldio.write_manifest(os.path.join(out, "manifest.txt"), man)
    for i, d in enumerate(res.directions):
        print(f"direction {i}: best rel err {fmt(d.best_rel_err)}, "
              f"slope {fmt(d.slope)}")
    print(f"grad-check: gradient {'pass' if res.passed else 'FAIL'}, "
          f"dtau {'pass' if dres.passed else 'FAIL'}")
    return 0 if (res.passed and dres.passed) else 1


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemodose",
                                 description="Dose optimization for a "
                                             "diffuse-interface growth model")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="config file path or preset:<name>")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the [run] seed")

    p_sim = sub.add_parser("simulate", help="run the forward model")
    common(p_sim)

    p_opt = sub.add_parser("optimize", help="run the projected-gradient descent")
    common(p_opt)
    p_opt.add_argument("--include-btau-term", action="store_true",
                       help="add the dose-rate term to the time derivative")

    p_ver = sub.add_parser("verify", help="run the certification battery")
    common(p_ver)
    p_ver.add_argument("--sabotage", choices=SABOTAGE_TARGETS, default=None,
                       help="corrupt one adjoint ingredient; the battery "
                            "must then fail")

    p_gc = sub.add_parser("grad-check", help="finite-difference gradient probe")
    common(p_gc)
    p_gc.add_argument("--tau-index", type=int, default=None,
                      help="treatment-time node (default: 3/4 of the horizon)")
    p_gc.add_argument("--include-btau-term", action="store_true",
                      help="add the dose-rate term to the time derivative")
    return ap


_COMMANDS = {
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "verify": _cmd_verify,
    "grad-check": _cmd_grad_check,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = resolve_config_arg(args.config)
        built = build_problem(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else built.seed
    os.makedirs(args.out, exist_ok=True)
    try:
        return _COMMANDS[args.command](built, args.out, seed, args)
    except (LinearSolverError, DivergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
