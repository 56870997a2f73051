"""Command-line interface.

Every option can also be given in a JSON file passed with ``--config``; keys
are the option names with dashes replaced by underscores, either at the top
level or inside a section named after the subcommand. Command-line flags win
over the file, which wins over built-in defaults. The effective configuration
is echoed into each JSON summary.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 integration error, 4 field blow-up.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import field as fld
from . import verify as vfy
from .integrator import IntegrationError, IntegratorConfig, detect_period, integrate, write_csv
from .phase import DomainError, ModelParams, PhaseState, SurfaceTag, classify, equilibria, hamiltonian, separatrix_points
from .surface import (
    generate_mesh,
    helicoidal_residual,
    mean_curvature_discrete,
    write_obj,
)

log = logging.getLogger("cmcflow")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_BLOWUP = 0, 1, 2, 3, 4

REQUIRED = object()


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Option:
    key: str
    type: Callable
    default: Any
    help: str
    choices: Optional[Sequence[str]] = None


_STATE = [Option(k, float, 0.0, f"initial {k}") for k in ("p1", "p2", "q1", "q2")]
_PARAMS = [Option("lam", float, 0.5, "wavenumber lambda"),
           Option("mean_curvature", float, 0.5, "mean curvature H")]
_INTEGRATOR = [
    Option("dt", float, 1e-3, "time step"),
    Option("t_start", float, 0.0, "start time"),
    Option("t_end", float, REQUIRED, "end time"),
    Option("method", str, "gauss4", "integration scheme", ("gauss4", "midpoint")),
    Option("newton_tol", float, 1e-13, "Newton residual tolerance"),
    Option("newton_max_iter", int, 25, "Newton iteration cap"),
    Option("period_tol", float, 1e-8, "return distance accepted as a period"),
]

OPTIONS: dict[str, list[Option]] = {
    "trajectory": _STATE + _PARAMS + _INTEGRATOR + [
        Option("record_stride", int, 1, "record every n-th step"),
    ],
    "surface": _STATE + _PARAMS + _INTEGRATOR + [
        Option("record_stride", int, 10, "steps between mesh rows"),
        Option("x_count", int, 64, "mesh columns"),
        Option("x_start", float, 0.0, "first x value"),
        Option("x_end", float, 2.0 * math.pi, "last x value (closed form) or ignored (generic)"),
        Option("frame", str, "base", "base point or screw axis at the origin", ("base", "axis")),
    ],
    "phase-portrait": _PARAMS + [
        Option("p_min", float, -1.0, "lower p1 bound"),
        Option("p_max", float, 1.0, "upper p1 bound"),
        Option("q_min", float, -1.0, "lower q1 bound"),
        Option("q_max", float, 1.0, "upper q1 bound"),
        Option("n_p", int, 201, "p1 grid points"),
        Option("n_q", int, 201, "q1 grid points"),
        Option("separatrix_count", int, 64, "annotated points per separatrix loop"),
    ],
    "pde": _STATE + _PARAMS + [
        Option("init", str, "ansatz", "initial data family", ("ansatz", "random", "zero")),
        Option("length", float, 4.0 * math.pi, "periodic domain length"),
        Option("n", int, 256, "grid points (even, >= 16)"),
        Option("dt", float, 1e-3, "time step"),
        Option("t_end", float, 5.0, "end time"),
        Option("stride", int, 100, "steps between snapshots"),
        Option("k_cut", float, 2.0, "Galerkin cutoff wavenumber"),
        Option("amplitude", float, 1e-4, "random data amplitude"),
        Option("modes", int, 2, "random data Fourier modes"),
        Option("blowup_factor", float, 1e6, "abort once max|psi| grows by this factor"),
    ],
    "verify": [
        Option("filter", str, "", "substring selecting checks by name"),
    ],
}

GLOBALS = {"out": "out", "seed": 0, "tol": None}


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON configuration file")
    p.add_argument("--out", default=d, help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=d, help="seed for randomized data and checks")
    p.add_argument("--tol", type=float, default=d,
                   help="classification tolerance; for verify, replaces every threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmcflow", description="CMC surfaces from a reduced Hamiltonian flow.")
    _add_globals(parser, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in OPTIONS.items():
        sp = sub.add_parser(name)
        _add_globals(sp, suppress=True)
        for opt in options:
            flag = "--" + opt.key.replace("_", "-")
            aliases = [flag] + (["--H"] if opt.key == "mean_curvature" else [])
            sp.add_argument(*aliases, dest=opt.key, type=opt.type, choices=opt.choices,
                            default=argparse.SUPPRESS, help=opt.help)
    return parser


def resolve(args: argparse.Namespace) -> tuple[dict, dict]:
    """Merge defaults, config file and flags into (command options, global options)."""
    given = vars(args)
    file_cfg: dict = {}
    if given.get("config"):
        try:
            with open(given["config"]) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {given['config']}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    section = file_cfg.get(args.command, {})
    flat = {k: v for k, v in file_cfg.items() if k not in OPTIONS}
    merged_file = {**flat, **(section if isinstance(section, dict) else {})}

    options = {o.key: o for o in OPTIONS[args.command]}
    unknown = set(merged_file) - set(options) - set(GLOBALS)
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")

    glob = {k: given.get(k, merged_file.get(k, v)) for k, v in GLOBALS.items()}
    cfg = {}
    for key, opt in options.items():
        value = given.get(key, merged_file.get(key, opt.default))
        if value is REQUIRED:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        try:
            value = opt.type(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
        if opt.choices and value not in opt.choices:
            raise ConfigError(f"{key} must be one of {list(opt.choices)}")
        cfg[key] = value
    if glob["tol"] is not None and not (isinstance(glob["tol"], (int, float)) and glob["tol"] >= 0):
        raise ConfigError("--tol must be a non-negative number")
    return cfg, glob


# -- output helpers ---------------------------------------------------------

def _dump_json(data: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def _finite_or_none(v):
    return None if v is None or not math.isfinite(v) else float(v)


def _out_dir(glob: dict) -> Path:
    out = Path(glob["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _params(cfg) -> ModelParams:
    return ModelParams(cfg["lam"], cfg["mean_curvature"])


def _state(cfg) -> PhaseState:
    return PhaseState(cfg["p1"], cfg["p2"], cfg["q1"], cfg["q2"])


def _integrator_cfg(cfg) -> IntegratorConfig:
    return IntegratorConfig(dt=cfg["dt"], t_span=(cfg["t_start"], cfg["t_end"]),
                            newton_tol=cfg["newton_tol"], newton_max_iter=cfg["newton_max_iter"],
                            record_stride=cfg["record_stride"], method=cfg["method"])


def _class_tol(glob) -> float:
    return 1e-9 if glob["tol"] is None else float(glob["tol"])


def _period(traj, cfg) -> Optional[float]:
    if len(traj) < 3:
        return None
    return detect_period(traj, tol=cfg["period_tol"])


def _echo(cfg, glob) -> dict:
    return {**cfg, **{k: v for k, v in glob.items() if k != "out"}}


# -- commands ---------------------------------------------------------------

def cmd_trajectory(cfg: dict, glob: dict) -> int:
    params, state, icfg = _params(cfg), _state(cfg), _integrator_cfg(cfg)
    tol = _class_tol(glob)
    cls = classify(state, params, tol)
    out = _out_dir(glob)
    traj = integrate(state, params, icfg)
    drift_h, drift_m = traj.max_drift
    write_csv(traj, out / "trajectory.csv")
    summary = {
        "class": str(cls.tag), "energy": cls.energy, "angular": cls.angular,
        "period": _finite_or_none(_period(traj, cfg)),
        "max_drift_H0": drift_h, "max_drift_M": drift_m,
        "config": _echo(cfg, glob),
    }
    _dump_json(summary, out / "trajectory.json")
    log.info("trajectory: %s, %d samples", cls.tag, len(traj))
    return EXIT_OK


def _generic_mesh(traj, cfg, params):
    """Surface for non-canonical parameters via the quadrature inducer on ansatz fields."""
    length = 2.0 * math.pi / abs(params.lam)
    n = max(16, cfg["x_count"] + cfg["x_count"] % 2)
    fields = fld.ansatz_sequence(traj.states, traj.times, params, length, n)
    return fld.induce_generic(fields, params, "tx")


def cmd_surface(cfg: dict, glob: dict) -> int:
    params, state, icfg = _params(cfg), _state(cfg), _integrator_cfg(cfg)
    if state.rho == 0.0:
        raise ConfigError("degenerate initial data: the zero state induces no surface")
    if cfg["x_count"] < 3:
        raise ConfigError("x_count must be at least 3")
    if not cfg["x_end"] > cfg["x_start"]:
        raise ConfigError("x_end must exceed x_start")
    cls = classify(state, params, _class_tol(glob))
    out = _out_dir(glob)
    traj = integrate(state, params, icfg)
    if params.is_canonical:
        mesh = generate_mesh(traj, cfg["x_count"], (cfg["x_start"], cfg["x_end"]), params, cfg["frame"])
        residual = helicoidal_residual(traj, params, frame=cfg["frame"])
        inducer = "closed-form"
    else:
        if len(traj) < 3:
            raise ConfigError("the generic inducer needs at least three mesh rows")
        mesh = _generic_mesh(traj, cfg, params)
        residual = None
        inducer = "generic"
    h = mean_curvature_discrete(mesh)
    h = h[np.isfinite(h)]
    write_obj(mesh, out / "surface.obj")
    q25, q50, q75 = np.percentile(h, [25, 50, 75]) if h.size else (math.nan,) * 3
    report = {
        "class": str(cls.tag), "energy": cls.energy, "angular": cls.angular,
        "period": _finite_or_none(_period(traj, cfg)),
        "vertex_count": int(len(mesh.points)), "face_count": int(len(mesh.faces)),
        "H_discrete_median": _finite_or_none(q50), "H_discrete_iqr": _finite_or_none(q75 - q25),
        "helicoidal_residual": residual, "inducer": inducer,
        "config": _echo(cfg, glob),
    }
    _dump_json(report, out / "surface.json")
    log.info("surface: %s, %d vertices", cls.tag, len(mesh.points))
    return EXIT_OK


PORTRAIT_COLUMNS = ("p1", "q1", "H0", "class_tag", "annotation")


def cmd_phase_portrait(cfg: dict, glob: dict) -> int:
    params = _params(cfg)
    tol = _class_tol(glob)
    if cfg["n_p"] < 2 or cfg["n_q"] < 2 or cfg["separatrix_count"] < 2:
        raise ConfigError("grid and separatrix resolutions must be at least 2")
    if not (cfg["p_max"] > cfg["p_min"] and cfg["q_max"] > cfg["q_min"]):
        raise ConfigError("grid bounds must be ordered")
    if tol <= 0:
        raise ConfigError("--tol must be positive for classification")
    out = _out_dir(glob)
    rows = []

    def add(p1, q1, note):
        c = classify((p1, 0.0, q1, 0.0), params, tol)
        rows.append((p1, q1, c.energy, str(c.tag), note))

    for p1 in np.linspace(cfg["p_min"], cfg["p_max"], cfg["n_p"]):
        for q1 in np.linspace(cfg["q_min"], cfg["q_max"], cfg["n_q"]):
            add(float(p1), float(q1), "grid")
    for e in equilibria(params):
        add(e.p1, e.q1, "equilibrium")
    for p1, q1 in separatrix_points(params, cfg["separatrix_count"]):
        add(float(p1), float(q1), "separatrix")

    with open(out / "phase_portrait.csv", "w") as fh:
        fh.write(",".join(PORTRAIT_COLUMNS) + "\n")
        for p1, q1, e, tag, note in rows:
            fh.write(f"{p1:.17g},{q1:.17g},{e:.17g},{tag},{note}\n")
    grid = [r for r in rows if r[4] == "grid"]
    counts = {str(t): sum(r[3] == str(t) for r in grid) for t in SurfaceTag}
    summary = {
        "rows": len(rows), "grid_points": len(grid),
        "equilibria": sum(r[4] == "equilibrium" for r in rows),
        "min_grid_energy": min(r[2] for r in grid),
        "equilibrium_energy": hamiltonian(equilibria(params)[1], params),
        "class_counts": counts,
        "config": _echo(cfg, glob),
    }
    _dump_json(summary, out / "phase_portrait.json")
    return EXIT_OK


def _pde_initial(cfg, params, glob) -> fld.FieldState:
    n, length = cfg["n"], cfg["length"]
    if n < 16 or n % 2:
        raise ConfigError(f"n must be even and at least 16, got {n}")
    if not length > 0:
        raise ConfigError("length must be positive")
    if cfg["init"] == "ansatz":
        try:
            fld.check_commensurate(params.lam, length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return fld.ansatz_field(_state(cfg), params, length, n)
    if cfg["init"] == "random":
        rng = np.random.default_rng(glob["seed"])
        return fld.smooth_random_field(rng, length, n, cfg["modes"], cfg["amplitude"])
    zero = np.zeros(n, dtype=complex)
    return fld.FieldState(length, zero, zero.copy())


def cmd_pde(cfg: dict, glob: dict) -> int:
    params = _params(cfg)
    f0 = _pde_initial(cfg, params, glob)
    if not (cfg["dt"] > 0 and cfg["t_end"] >= 0 and cfg["stride"] >= 1 and cfg["k_cut"] > 0):
        raise ConfigError("dt and k_cut must be positive, t_end non-negative and stride >= 1")
    if cfg["dt"] > 0.5 * cfg["length"] / cfg["n"]:
        raise ConfigError("dt violates the guard dt <= 0.5 L/N")
    out = _out_dir(glob)
    fields = fld.evolve(f0, params, cfg["dt"], cfg["t_end"], stride=cfg["stride"],
                        k_cut=cfg["k_cut"], blowup_factor=cfg["blowup_factor"])
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i, f in enumerate(fields):
        fld.write_snapshot(f, params, snap_dir / f"snap_{i:05d}.csv")
    sets = [fld.conserved_quantities(f, params) for f in fields]
    fld.write_conservation_report([f.time for f in fields], sets, out / "conservation.csv")
    drift = fld.conservation_drift(sets)
    summary = {
        "max_drift": {k: float(v) for k, v in drift.items()},
        "reality_defect": max(c.reality_defect for c in sets),
        "snapshots": len(fields),
        "final_time": fields[-1].time,
        "reduction_error": None,
        "config": _echo(cfg, glob),
    }
    if cfg["init"] == "ansatz":
        icfg = IntegratorConfig(dt=cfg["dt"], t_span=(0.0, cfg["t_end"]), record_stride=cfg["stride"])
        states = integrate(_state(cfg), params, icfg).states
        summary["reduction_error"] = fld.reduction_error(fields, states, params)
        summary["spectral_concentration"] = min(fld.spectral_concentration(f, params) for f in fields)
    _dump_json(summary, out / "pde.json")
    return EXIT_OK


def cmd_verify(cfg: dict, glob: dict) -> int:
    results = vfy.run_checks(cfg["filter"] or None, glob["tol"], glob["seed"])
    if not results:
        raise ConfigError(f"no checks match {cfg['filter']!r}")
    print(vfy.format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "trajectory": cmd_trajectory,
    "surface": cmd_surface,
    "phase-portrait": cmd_phase_portrait,
    "pde": cmd_pde,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg, glob = resolve(args)
        return COMMANDS[args.command](cfg, glob)
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except fld.BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
