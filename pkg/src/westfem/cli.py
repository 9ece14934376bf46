"""Batch front-end for the convergence studies.

Subcommands ``channel``, ``focus``, ``mms`` and ``dump-mesh``.  Settings
come from compiled-in defaults (the standard experiment settings), an
optional flat ``key=value`` config file and command-line overrides, in
that order of precedence.  Every table-producing command echoes its
effective configuration next to the outputs and, unless ``--no-plots``
is given, renders figures alongside the delimited files.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 degeneracy.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import plots, report
from .errors import FitFailureError
from .linalg import IterativeSolveError, SingularPreconditionerError
from .mesh import dump_mesh
from .problems import ChannelData, FocusSource, MmsCase, study_mesh
from .studies import channel_study, focus_study, mms_study
from .wavesolver import (DegenerateStateError, FixedPointConfig,
                         FixedPointDivergenceError, MaterialParams,
                         NewmarkParams, SolverConfig, TimeGrid)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DEGENERACY = 4


class ConfigError(ValueError):
    pass


_COMMON_DEFAULTS = {
    "c": 1500.0, "rho": 1000.0, "b": 6e-9, "beta_a": 3.5,
    "newmark_beta": 0.45, "newmark_gamma": 0.75,
    "fp_tol": 1e-8, "fp_max_iter": 50,
    "pcg_tol": 1e-10,
    "out": "out", "plots": True,
}

_DEFAULTS = {
    "channel": {
        **_COMMON_DEFAULTS,
        "levels": "1,2,3,4", "ref_level": 6,
        "tsteps": 2000, "final_time": 37e-6, "stride": 400,
        "A1": 1.2e8, "A2": -1e11, "sigma1": 0.015, "sigma2": 0.02,
        "mu": 0.1,
    },
    "focus": {
        **_COMMON_DEFAULTS,
        "levels": "1,2,3,4", "ref_level": 0,
        "tsteps": 3500, "final_time": 40e-6, "stride": 700,
        "g0": 1e7, "freq": 60e3,
    },
    "mms": {
        **_COMMON_DEFAULTS,
        "levels": "3,4,5,6,7", "ref_level": 0,
        "tsteps": 2000, "final_time": 1.0, "stride": 400,
        "c": 1.0, "rho": 1.0, "b": 1e-2, "beta_a": 0.0,
        "newmark_beta": 0.25, "newmark_gamma": 0.5,
    },
}

_PAPER_OVERRIDES = {
    "channel": {"levels": "1,2,3,4,5,6", "ref_level": 8},
    "focus": {"levels": "1,2,3,4,5"},
    "mms": {},
}

_BOOL_KEYS = {"plots"}
_INT_KEYS = {"ref_level", "tsteps", "stride", "fp_max_iter"}
_STR_KEYS = {"levels", "out"}


def _coerce(key, raw):
    if key in _STR_KEYS:
        return str(raw)
    if key in _BOOL_KEYS:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"boolean expected for {key!r}, got {raw!r}")
    try:
        return int(raw) if key in _INT_KEYS else float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def _read_config_file(path):
    pairs = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ConfigError(
                        f"{path}:{lineno}: expected key=value")
                key, value = (part.strip() for part in text.split("=", 1))
                pairs[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return pairs


def _parse_levels(text):
    try:
        levels = sorted({int(tok) for tok in str(text).split(",") if tok})
    except ValueError as exc:
        raise ConfigError(f"bad level list {text!r}") from exc
    if not levels or min(levels) < 1:
        raise ConfigError("levels must be positive integers")
    return levels


def build_config(kind, args):
    """Merge defaults, preset, config file and CLI overrides."""
    cfg = dict(_DEFAULTS[kind])
    if args.preset == "paper":
        cfg.update(_PAPER_OVERRIDES[kind])
    if args.config:
        file_pairs = _read_config_file(args.config)
        for key, value in file_pairs.items():
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = value
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    cfg = {key: _coerce(key, value) for key, value in cfg.items()}
    cfg["levels"] = _parse_levels(cfg["levels"])
    if cfg["tsteps"] < 1:
        raise ConfigError("tsteps must be at least 1")
    if cfg["final_time"] <= 0.0:
        raise ConfigError("final time must be positive")
    if kind == "channel" and cfg["ref_level"] <= max(cfg["levels"]):
        raise ConfigError("ref_level must exceed every study level")
    if kind == "focus" and len(cfg["levels"]) < 3:
        raise ConfigError("focus study needs at least three levels")
    return cfg


def _study_objects(kind, cfg):
    material = MaterialParams(cfg["c"], cfg["rho"], cfg["b"], cfg["beta_a"])
    grid = TimeGrid(cfg["final_time"], cfg["tsteps"] + 1)
    newmark = NewmarkParams(cfg["newmark_beta"], cfg["newmark_gamma"])
    fp = FixedPointConfig(cfg["fp_tol"], cfg["fp_max_iter"])
    solver = SolverConfig(tol=cfg["pcg_tol"])
    return material, grid, newmark, fp, solver


def _echo_config(cfg, out_dir, kind):
    pairs = {key: (",".join(str(v) for v in value)
                   if key == "levels" else value)
             for key, value in cfg.items()}
    pairs["kind"] = kind
    report.write_effective_config(pairs,
                                  os.path.join(out_dir, "config.txt"))


def _write_level_files(trajectories, out_dir):
    for level in sorted(trajectories):
        traj = trajectories[level]
        report.write_run_summary(
            traj, os.path.join(out_dir, f"level{level}_summary.csv"))
        report.write_snapshots(
            traj, os.path.join(out_dir, f"level{level}_snapshots.csv"))


def _progress(quiet):
    if quiet:
        return None
    return lambda msg: print(f"[westfem] {msg}", file=sys.stderr, flush=True)


def cmd_channel(args):
    cfg = build_config("channel", args)
    material, grid, newmark, fp, solver = _study_objects("channel", cfg)
    data = ChannelData(cfg["A1"], cfg["A2"], cfg["sigma1"], cfg["sigma2"],
                       cfg["mu"])
    result = channel_study(cfg["levels"], cfg["ref_level"], grid, material,
                           newmark, fp, data, solver, cfg["stride"],
                           progress=_progress(args.quiet))
    out = cfg["out"]
    report.write_order_table(result.table, os.path.join(out, "orders.csv"))
    _write_level_files(result.trajectories, out)
    _echo_config(cfg, out, "channel")
    if cfg["plots"]:
        plots.plot_convergence(result, out)
        plots.plot_snapshot_1d(result.trajectories[result.ref_level], out,
                               name="snapshots_ref.png")
    return _finish(result.trajectories)


def cmd_focus(args):
    cfg = build_config("focus", args)
    material, grid, newmark, fp, solver = _study_objects("focus", cfg)
    source = FocusSource(cfg["g0"], cfg["freq"])
    result = focus_study(cfg["levels"], grid, material, newmark, fp, source,
                         solver, cfg["stride"],
                         progress=_progress(args.quiet))
    out = cfg["out"]
    report.write_qoi_table(result.levels, result.h, result.q,
                           os.path.join(out, "qoi.csv"))
    report.write_fit_report(result.fit, os.path.join(out, "fit.csv"))
    report.write_qoi_orders(result.levels, result.e_ref, result.orders,
                            os.path.join(out, "qoi_orders.csv"))
    _write_level_files(result.trajectories, out)
    _echo_config(cfg, out, "focus")
    if cfg["plots"]:
        plots.plot_qoi_fit(result, out)
        plots.plot_field_2d(result.trajectories[max(result.levels)], out,
                            name="field_finest.png")
    return _finish(result.trajectories)


def cmd_mms(args):
    cfg = build_config("mms", args)
    material, grid, newmark, _, solver = _study_objects("mms", cfg)
    case = MmsCase(c=material.c, b=material.b)
    result = mms_study(cfg["levels"], grid, case, newmark, solver,
                       cfg["stride"], progress=_progress(args.quiet))
    out = cfg["out"]
    report.write_order_table(result.table, os.path.join(out, "orders.csv"))
    _write_level_files(result.trajectories, out)
    _echo_config(cfg, out, "mms")
    if cfg["plots"]:
        plots.plot_convergence(result, out)
    return _finish(result.trajectories)


def cmd_dump_mesh(args):
    if args.level < 1:
        raise ConfigError("level must be at least 1")
    mesh = study_mesh(args.kind, args.level)
    dump_mesh(mesh, args.out)
    return EXIT_OK


def _finish(trajectories):
    for traj in trajectories.values():
        if traj.margin.size and traj.margin.min() <= 0.0:
            return EXIT_DEGENERACY
    return EXIT_OK


def _add_study_flags(sub, keys):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--preset", choices=("desk", "paper"), default="desk",
                     help="compiled-in experiment scale (default desk)")
    sub.add_argument("--levels", help="comma-separated refinement levels")
    sub.add_argument("--ref-level", dest="ref_level", type=int,
                     help="reference refinement level")
    sub.add_argument("--tsteps", type=int, help="number of time steps")
    sub.add_argument("--final-time", dest="final_time", type=float,
                     help="final time [s]")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--stride", type=int, help="snapshot stride in steps")
    sub.add_argument("--no-plots", dest="plots", action="store_false",
                     default=None, help="skip figure rendering")
    sub.add_argument("--fp-tol", dest="fp_tol", type=float,
                     help="fixed-point tolerance on the acceleration")
    sub.add_argument("--fp-max-iter", dest="fp_max_iter", type=int)
    sub.add_argument("--pcg-tol", dest="pcg_tol", type=float)
    sub.add_argument("--newmark-beta", dest="newmark_beta", type=float)
    sub.add_argument("--newmark-gamma", dest="newmark_gamma", type=float)
    sub.add_argument("--c", type=float, help="speed of sound [m/s]")
    sub.add_argument("--rho", type=float, help="mass density [kg/m^3]")
    sub.add_argument("--b", type=float, help="sound diffusivity [m^2/s]")
    sub.add_argument("--beta-a", dest="beta_a", type=float,
                     help="coefficient of nonlinearity")
    sub.add_argument("--quiet", action="store_true")
    for key, flag, help_text in keys:
        sub.add_argument(flag, dest=key, type=float, help=help_text)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="westfem",
        description="Westervelt finite element convergence studies")
    subs = parser.add_subparsers(dest="command", required=True)

    chan = subs.add_parser("channel", help="1D channel convergence study")
    _add_study_flags(chan, [
        ("A1", "--a1", "pressure pulse amplitude [Pa]"),
        ("A2", "--a2", "velocity pulse amplitude [Pa]"),
        ("sigma1", "--sigma1", "pressure pulse width"),
        ("sigma2", "--sigma2", "velocity pulse width"),
        ("mu", "--mu", "pulse center [m]"),
    ])
    chan.set_defaults(func=cmd_channel)

    foc = subs.add_parser("focus", help="2D focused-ultrasound study")
    _add_study_flags(foc, [
        ("g0", "--g0", "transducer flux amplitude [Pa/m]"),
        ("freq", "--freq", "transducer frequency [Hz]"),
    ])
    foc.set_defaults(func=cmd_focus)

    mms = subs.add_parser("mms", help="linear manufactured-solution study")
    _add_study_flags(mms, [])
    mms.set_defaults(func=cmd_mms)

    dump = subs.add_parser("dump-mesh", help="write a mesh as plain text")
    dump.add_argument("--kind", choices=("channel", "focus", "mms"),
                      required=True)
    dump.add_argument("--level", type=int, required=True)
    dump.add_argument("--out", required=True)
    dump.set_defaults(func=cmd_dump_mesh)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"westfem: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateStateError as exc:
        step = getattr(exc, "step_index", "?")
        level = getattr(exc, "study_level", "?")
        print(f"westfem: degeneracy at level {level}, step {step}: {exc}",
              file=sys.stderr)
        return EXIT_DEGENERACY
    except (IterativeSolveError, SingularPreconditionerError,
            FixedPointDivergenceError, FitFailureError) as exc:
        step = getattr(exc, "step_index", "?")
        level = getattr(exc, "study_level", "?")
        print(f"westfem: solver failure at level {level}, step {step}: "
              f"{exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
