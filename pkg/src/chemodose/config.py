"""Run configuration: INI-style text with [section] blocks and key = value
lines, full-line comments starting with # or ;. Errors carry the offending
line number. Unknown sections, unknown keys and malformed values are
rejected rather than ignored.

Field-valued keys take one of
    const:<float>            constant field
    file:<path>              FIELD v1 snapshot, resolved next to the config
    tanh-seed                centered spherical seed profile (phi0 only)
    trajectory:const:<float> target tracks the run under that constant dose
                             (phi_Q only)
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np

from . import fieldio
from .errors import ConfigError
from .grid import Grid, ScalarField, check_same_grid, const_field
from .model import ModelParams, default_interpolant, default_potential
from .objective import ObjectiveSpec
from .optimizer import OptimizerConfig
from .state import DEFAULT_S_STAB, ProblemData, solve_state
from .timegrid import Control, TimeGrid, const_control

_FLOAT = "float"
_INT = "int"
_STR = "str"

_SCHEMA = {
    "grid": {"dim": _INT, "n_x": _INT, "n_y": _INT, "L_x": _FLOAT, "L_y": _FLOAT},
    "time": {"t_end": _FLOAT, "n_steps": _INT},
    "model": {"P": _FLOAT, "Acal": _FLOAT, "Ccal": _FLOAT, "Bcal": _FLOAT,
              "alpha": _FLOAT, "A": _FLOAT, "B": _FLOAT, "s_stab": _FLOAT},
    "objective": {"beta_Q": _FLOAT, "beta_Omega": _FLOAT, "beta_S": _FLOAT,
                  "beta_u": _FLOAT, "beta_T": _FLOAT, "r_relax": _FLOAT,
                  "phi_Q": _STR, "phi_Omega": _STR},
    "initial": {"phi0": _STR, "seed_radius": _FLOAT, "sigma0": _STR,
                "sigma_S": _STR},
    "control": {"init": _STR},
    "optimizer": {"max_outer_iters": _INT, "stationarity_tol": _FLOAT,
                  "tau_tol": _STR, "armijo_init_step": _FLOAT},
    "run": {"seed": _INT, "snapshot_every": _INT},
    "verify": {"level": _STR},
}

_DEFAULTS = {
    ("grid", "dim"): 1, ("grid", "n_x"): 128, ("grid", "n_y"): 0,
    ("grid", "L_x"): 1.0, ("grid", "L_y"): 1.0,
    ("time", "t_end"): 1.0, ("time", "n_steps"): 200,
    ("model", "P"): 1.0, ("model", "Acal"): 0.5, ("model", "Ccal"): 1.0,
    ("model", "Bcal"): 1.0, ("model", "alpha"): 2.0, ("model", "A"): 1.0,
    ("model", "B"): 1e-3, ("model", "s_stab"): DEFAULT_S_STAB,
    ("objective", "beta_Q"): 1.0, ("objective", "beta_Omega"): 0.5,
    ("objective", "beta_S"): 0.1, ("objective", "beta_u"): 0.1,
    ("objective", "beta_T"): 0.05, ("objective", "r_relax"): 0.05,
    ("objective", "phi_Q"): "const:-1", ("objective", "phi_Omega"): "const:-1",
    ("initial", "phi0"): "tanh-seed", ("initial", "seed_radius"): 0.25,
    ("initial", "sigma0"): "const:1", ("initial", "sigma_S"): "const:1",
    ("control", "init"): "const:0.5",
    ("optimizer", "max_outer_iters"): 50,
    ("optimizer", "stationarity_tol"): 1e-4,
    ("optimizer", "tau_tol"): "auto",
    ("optimizer", "armijo_init_step"): 1.0,
    ("run", "seed"): 0, ("run", "snapshot_every"): 1,
    ("verify", "level"): "full",
}


@dataclass(frozen=True)
class RunConfig:
    values: dict
    lines: dict
    text: str
    base_dir: str

    def get(self, section: str, key: str):
        return self.values.get((section, key), _DEFAULTS[(section, key)])

    def line_of(self, section: str, key: str):
        return self.lines.get((section, key))


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    values = {}
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside any [section]", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in values:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        kind = _SCHEMA[section][key]
        try:
            if kind == _INT:
                parsed = int(val)
            elif kind == _FLOAT:
                parsed = float(val)
            else:
                parsed = val
        except ValueError:
            raise ConfigError(f"{key} expects a {kind}, got {val!r}", lineno) from None
        values[(section, key)] = parsed
        lines[(section, key)] = lineno
    return RunConfig(values, lines, text, base_dir)


def load_config(path: str) -> RunConfig:
    with open(path, "r") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def resolve_config_arg(arg: str) -> RunConfig:
    """A config path, or preset:<name> for one of the shipped presets."""
    if arg.startswith("preset:"):
        name = arg.split(":", 1)[1]
        path = os.path.join(os.path.dirname(__file__), "presets", name + ".cfg")
        if not os.path.isfile(path):
            raise ConfigError(f"unknown preset {name!r}")
        return load_config(path)
    if not os.path.isfile(arg):
        raise ConfigError(f"config file not found: {arg}")
    return load_config(arg)


# ------------------------------------------------------------- building

@dataclass(frozen=True)
class BuiltProblem:
    grid: Grid
    timegrid: TimeGrid
    data: ProblemData
    obj: ObjectiveSpec
    u0: Control
    s_stab: float
    optimizer: OptimizerConfig
    seed: int
    snapshot_every: int
    verify_level: str
    factory: object          # (n_cells, n_steps) -> (data, u0), or None
    config_text: str


def _tanh_seed(grid: Grid, radius: float, eps_if: float) -> ScalarField:
    centers = grid.cell_centers()
    if grid.dim == 1:
        d = np.abs(centers[0] - 0.5 * grid.lengths[0])
    else:
        X, Y = grid.meshgrid()
        d = np.hypot(X - 0.5 * grid.lengths[0], Y - 0.5 * grid.lengths[1]).ravel()
    return ScalarField(grid, np.tanh((radius - d) / (math.sqrt(2.0) * eps_if)))


def _build_field(cfg: RunConfig, section: str, key: str, grid: Grid,
                 eps_if: float, seed_radius: float,
                 allow_tanh: bool = False) -> ScalarField:
    spec = cfg.get(section, key)
    line = cfg.line_of(section, key)
    if spec.startswith("const:"):
        try:
            return const_field(grid, float(spec[len("const:"):]))
        except ValueError:
            raise ConfigError(f"{key}: bad constant in {spec!r}", line) from None
    if spec.startswith("file:"):
        path = os.path.join(cfg.base_dir, spec[len("file:"):])
        try:
            f = fieldio.read_field(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}", line) from None
        if f.grid != grid:
            raise ConfigError(f"{key}: field grid {f.grid.n} does not match "
                              f"the configured grid {grid.n}", line)
        return f
    if spec == "tanh-seed" and allow_tanh:
        return _tanh_seed(grid, seed_radius, eps_if)
    raise ConfigError(f"{key}: unrecognized field spec {spec!r}", line)


def _is_analytic(spec: str) -> bool:
    return (spec.startswith("const:") or spec == "tanh-seed"
            or spec.startswith("trajectory:const:"))


def build_problem(cfg: RunConfig) -> BuiltProblem:
    dim = cfg.get("grid", "dim")
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}", cfg.line_of("grid", "dim"))
    n_x = cfg.get("grid", "n_x")
    if dim == 2:
        n_y = cfg.get("grid", "n_y")
        if n_y < 4:
            raise ConfigError("n_y (>= 4) is required when dim = 2",
                              cfg.line_of("grid", "n_y") or cfg.line_of("grid", "dim"))
        n = (n_x, n_y)
        lengths = (cfg.get("grid", "L_x"), cfg.get("grid", "L_y"))
    else:
        n = (n_x,)
        lengths = (cfg.get("grid", "L_x"),)
    try:
        grid = Grid(dim, n, lengths)
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line_of("grid", "n_x")) from None

    try:
        timegrid = TimeGrid(cfg.get("time", "t_end"), cfg.get("time", "n_steps"))
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line_of("time", "t_end")) from None

    try:
        params = ModelParams(P=cfg.get("model", "P"), Acal=cfg.get("model", "Acal"),
                             Ccal=cfg.get("model", "Ccal"), Bcal=cfg.get("model", "Bcal"),
                             alpha=cfg.get("model", "alpha"), A=cfg.get("model", "A"),
                             B=cfg.get("model", "B"))
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line_of("model", "P")) from None
    s_stab = cfg.get("model", "s_stab")

    def assemble(grid_r: Grid, timegrid_r: TimeGrid, with_obj: bool = True):
        eps_if = math.sqrt(params.B / params.A)
        radius = cfg.get("initial", "seed_radius")
        phi0 = _build_field(cfg, "initial", "phi0", grid_r, eps_if, radius,
                            allow_tanh=True)
        sigma0 = _build_field(cfg, "initial", "sigma0", grid_r, eps_if, radius)
        sigmaS = _build_field(cfg, "initial", "sigma_S", grid_r, eps_if, radius)
        try:
            data_r = ProblemData(phi0, sigma0, sigmaS, params,
                                 default_potential(), default_interpolant())
        except ValueError as exc:
            raise ConfigError(str(exc), cfg.line_of("initial", "sigma0")) from None

        init_spec = cfg.get("control", "init")
        if init_spec.startswith("const:") or init_spec.startswith("file:"):
            f = _build_field(cfg, "control", "init", grid_r, eps_if, radius)
            u0_r = Control(timegrid_r, tuple([f] * timegrid_r.n_nodes))
        else:
            raise ConfigError(f"init: unrecognized field spec {init_spec!r}",
                              cfg.line_of("control", "init"))

        if not with_obj:
            return data_r, None, u0_r

        def target(key):
            spec = cfg.get("objective", key)
            if key == "phi_Q" and spec.startswith("trajectory:const:"):
                try:
                    dose = float(spec[len("trajectory:const:"):])
                except ValueError:
                    raise ConfigError(f"{key}: bad constant in {spec!r}",
                                      cfg.line_of("objective", key)) from None
                ref = solve_state(data_r, const_control(grid_r, timegrid_r, dose),
                                  s_stab=s_stab)
                return ref.phi
            return _build_field(cfg, "objective", key, grid_r, eps_if, radius)

        try:
            obj_r = ObjectiveSpec(betaQ=cfg.get("objective", "beta_Q"),
                                  betaOmega=cfg.get("objective", "beta_Omega"),
                                  betaS=cfg.get("objective", "beta_S"),
                                  betaU=cfg.get("objective", "beta_u"),
                                  betaT=cfg.get("objective", "beta_T"),
                                  r_relax=cfg.get("objective", "r_relax"),
                                  phiQ=target("phi_Q"), phiOmega=target("phi_Omega"))
        except ValueError as exc:
            raise ConfigError(str(exc), cfg.line_of("objective", "beta_Q")) from None
        try:
            timegrid_r.window_steps(obj_r.r_relax)
        except ValueError as exc:
            raise ConfigError(str(exc), cfg.line_of("objective", "r_relax")) from None
        return data_r, obj_r, u0_r

    data, obj, u0 = assemble(grid, timegrid)

    tau_tol_spec = cfg.get("optimizer", "tau_tol")
    if tau_tol_spec == "auto":
        tau_tol = None
    else:
        try:
            tau_tol = float(tau_tol_spec)
        except ValueError:
            raise ConfigError(f"tau_tol expects a float or auto, got {tau_tol_spec!r}",
                              cfg.line_of("optimizer", "tau_tol")) from None
    try:
        opt = OptimizerConfig(max_outer_iters=cfg.get("optimizer", "max_outer_iters"),
                              stationarity_tol=cfg.get("optimizer", "stationarity_tol"),
                              tau_tol=tau_tol,
                              armijo_init_step=cfg.get("optimizer", "armijo_init_step"),
                              seed=cfg.get("run", "seed"))
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line_of("optimizer", "max_outer_iters")) from None

    level = cfg.get("verify", "level")
    if level not in ("quick", "full"):
        raise ConfigError(f"verify level must be quick or full, got {level!r}",
                          cfg.line_of("verify", "level"))

    factory = None
    analytic = all(_is_analytic(cfg.get(*sk)) for sk in
                   (("initial", "phi0"), ("initial", "sigma0"),
                    ("initial", "sigma_S"), ("objective", "phi_Q"),
                    ("objective", "phi_Omega"), ("control", "init")))
    if analytic:
        def factory(n_cells: int, n_steps: int):
            g = Grid(dim, (n_cells,) * dim, lengths)
            tg = TimeGrid(timegrid.t_end, n_steps)
            d, _, u = assemble(g, tg, with_obj=False)
            return d, u

    return BuiltProblem(grid, timegrid, data, obj, u0, s_stab, opt,
                        cfg.get("run", "seed"), cfg.get("run", "snapshot_every"),
                        level, factory, cfg.text)
