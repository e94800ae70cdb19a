"""Command-line front end for the simulator.

Four subcommands: `simulate` rolls out one trial and writes it in the
trial-log schema, `sweep` runs a parameter grid and writes a metrics
table, `bounds` reports the force-resolution intervals at one time
instant, and `compare` scores a simulated trial against a recorded one.

Every run leaves exactly one `manifest.json` in its output directory
with the fully resolved configuration (all defaults materialized) and
its sha256, so any run can be repeated bit-for-bit by passing the
manifest back through `--config`. Flags override config-file values.

Exit codes: 0 success, 2 usage or configuration error, 3 solver failure
(partial outputs are kept).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .scenarios import (PRIMITIVES, SweepGrid, build_scenario, builtin_grid,
                        run_sweep, summarize)
from .spatial import Twist
from .stepper import (SimConfig, SimState, SolverFailure,
                      force_resolution_bounds, simulate, step)
from .triallog import TrialLogError, load_log, trajectory_to_log, write_log
from .triallog import compare as compare_logs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3

# named experiment grids: primitive and the object they were run on
GRID_ALIASES = {
    "paper-linear-push": ("linear_push", "obj4"),
    "paper-pivot": ("pivot", "obj4"),
    "paper-roll": ("roll", "obj1"),
}

_SCENARIO_KEYS = {"primitive", "object", "grip", "vel", "slope", "offset"}
_COMMON_KEYS = {"dt", "mode", "mu_finger", "mu_pusher", "facets"}
_ALLOWED_KEYS = {
    "simulate": _SCENARIO_KEYS | _COMMON_KEYS,
    "bounds": _SCENARIO_KEYS | _COMMON_KEYS | {"time"},
    "sweep": {"primitive", "object", "grid", "grips", "speeds", "params",
              "runs"} | _COMMON_KEYS,
    "compare": {"max_shift"},
}


def _load_config(path: str, command: str, parser) -> dict:
    """Read a JSON config; a run manifest is accepted via its `config` key."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        parser.error(f"cannot read config file: {e}")
    except json.JSONDecodeError as e:
        parser.error(f"config file is not valid JSON: {e}")
    if isinstance(doc, dict) and isinstance(doc.get("config"), dict) \
            and "tool" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        parser.error("config must be a JSON object")
    unknown = sorted(set(doc) - _ALLOWED_KEYS[command] - {"command"})
    if unknown:
        parser.error(f"unknown config keys for {command}: {', '.join(unknown)}")
    if doc.get("command", command) != command:
        parser.error(f"config was written by {doc['command']!r}, "
                     f"not usable with {command!r}")
    return doc


def _pick(args, cfg: dict, key: str, attr: str | None = None):
    """Flag value if given, else config-file value, else None."""
    v = getattr(args, attr or key, None)
    return cfg.get(key) if v is None else v


def _parse_facets(value, parser) -> tuple[int, int] | None:
    if value is None:
        return None
    if isinstance(value, str):
        parts = value.split(",")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = [value]
    try:
        f = tuple(int(p) for p in parts)
    except (TypeError, ValueError):
        f = ()
    if len(f) != 2 or min(f) < 3:
        parser.error('--facets takes "F,P": finger and pusher facet counts, '
                     "each an integer >= 3")
    return f


def _sim_config(args, cfg: dict, parser) -> SimConfig:
    dt = _pick(args, cfg, "dt")
    mode = _pick(args, cfg, "mode")
    try:
        return SimConfig(
            dt=0.004 if dt is None else float(dt),
            mode="quasi_dynamic" if mode is None else
            str(mode).replace("-", "_"))
    except (TypeError, ValueError) as e:
        parser.error(str(e))


def _overrides(primitive: str, args, cfg: dict, parser) -> dict:
    ov = {}
    mf = _pick(args, cfg, "mu_finger")
    if mf is not None:
        ov["mu_finger"] = float(mf)
    mp = _pick(args, cfg, "mu_pusher")
    if mp is not None:
        # the roll primitive calls its external surface a platform
        ov["mu_platform" if primitive == "roll" else "mu_pusher"] = float(mp)
    facets = _parse_facets(_pick(args, cfg, "facets"), parser)
    if facets is not None:
        ov["finger_facets"], ov["pusher_facets"] = facets
    return ov


def _resolve_primitive(args, cfg: dict, parser) -> str:
    prim = _pick(args, cfg, "primitive")
    if prim is None:
        parser.error("a primitive is required (--primitive or config file)")
    prim = str(prim).replace("-", "_")
    if prim not in PRIMITIVES:
        parser.error(f"unknown primitive {prim!r}, expected one of "
                     f"{', '.join(p.replace('_', '-') for p in PRIMITIVES)}")
    return prim


def _resolve_scenario(args, cfg: dict, parser):
    prim = _resolve_primitive(args, cfg, parser)
    obj = _pick(args, cfg, "object", attr="object_id")
    if obj is None:
        parser.error("an object id is required (--object or config file)")
    grip = _pick(args, cfg, "grip")
    vel = _pick(args, cfg, "vel")
    if grip is None or vel is None:
        parser.error("--grip and --vel are required (flags or config file)")
    slope = _pick(args, cfg, "slope")
    offset = _pick(args, cfg, "offset")
    if slope is not None and prim != "linear_push":
        parser.error("--slope applies to the linear push only")
    if offset is not None and prim != "pivot":
        parser.error("--offset applies to the pivot only")
    param = slope if prim == "linear_push" else offset
    try:
        sc = build_scenario(prim, str(obj), float(grip), float(vel),
                            float(param or 0.0),
                            **_overrides(prim, args, cfg, parser))
    except (TypeError, ValueError) as e:
        parser.error(str(e))
    return sc


def _scenario_config(sc, config: SimConfig) -> dict:
    """The fully materialized per-trial settings, ready for a manifest."""
    out = {
        "primitive": sc.primitive,
        "object": sc.obj.id,
        "grip": sc.grip,
        "vel": sc.speed,
        "dt": config.dt,
        "mode": config.mode,
        "mu_finger": sc.mu_finger,
        "mu_pusher": sc.mu_pusher,
        "facets": [sc.finger_facets, sc.pusher_facets],
    }
    if sc.primitive == "linear_push":
        out["slope"] = sc.geometry_param
    elif sc.primitive == "pivot":
        out["offset"] = sc.geometry_param
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, argv: list[str],
                    config: dict, inputs: list, outputs: list) -> None:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    _write_json(out_dir / "manifest.json", {
        "tool": {"name": "inhandpush", "version": __version__},
        "command": command,
        "argv": argv,
        "config": config,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    })


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out is not None else Path("out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_SOLVER


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args, parser, argv: list[str]) -> int:
    cfg = _load_config(args.config, "simulate", parser) if args.config else {}
    sc = _resolve_scenario(args, cfg, parser)
    config = _sim_config(args, cfg, parser)
    out = _out_dir(args)

    traj = simulate(sc, config)
    outputs = []
    if traj.results:
        log = trajectory_to_log(traj)
        write_log(log, out / "trajectory.csv")
        outputs += [out / "trajectory.csv", out / "trajectory.json"]
    summary = summarize(traj)
    summary["scenario"] = sc.name
    summary["duration_s"] = sc.duration
    _write_json(out / "summary.json", summary)
    outputs.append(out / "summary.json")
    _write_manifest(out, "simulate", argv, _scenario_config(sc, config),
                    [], outputs)
    if traj.failed:
        return _fail(f"solver failed at t={traj.final_state.time:.3f}s: "
                     f"{traj.failure} (partial outputs in {out})")
    print(f"{sc.name}: {summary['steps']} steps, peak pusher force "
          f"{summary['peak_pusher_force']:.3f} N, slide "
          f"{summary['slide_down_mm']:.3f} mm, rotation "
          f"{summary['rotation_deg']:.2f} deg -> {out}")
    return EXIT_OK


_SWEEP_COLUMNS = ("index", "object", "grip", "speed", "param", "ok", "failure",
                  "steps", "peak_pusher_force", "slide_down_mm", "rotation_deg",
                  "finger_asymmetry", "max_net_residual")


def _resolve_grid(args, cfg: dict, parser) -> SweepGrid:
    alias = args.grid if args.grid is not None else cfg.get("grid")
    obj = _pick(args, cfg, "object", attr="object_id")
    if alias is not None:
        if alias not in GRID_ALIASES:
            parser.error(f"unknown grid {alias!r}, expected one of "
                         f"{', '.join(sorted(GRID_ALIASES))}")
        prim, default_obj = GRID_ALIASES[alias]
        try:
            return builtin_grid(prim, str(obj) if obj is not None
                                else default_obj)
        except ValueError as e:
            parser.error(str(e))
    prim = _resolve_primitive(args, cfg, parser)
    if obj is None:
        parser.error("an object id is required (--object or config file)")
    lists = {k: cfg.get(k) for k in ("grips", "speeds", "params")}
    if lists["grips"] is None or lists["speeds"] is None:
        parser.error("a custom sweep needs `grips` and `speeds` lists in the "
                     "config file (or use --grid)")
    try:
        grips = tuple(float(g) for g in lists["grips"])
        speeds = tuple(float(s) for s in lists["speeds"])
        params = tuple(float(p) for p in lists["params"]) \
            if lists["params"] is not None else (0.0,)
    except (TypeError, ValueError):
        parser.error("grips, speeds and params must be lists of numbers")
    grid = SweepGrid(prim, str(obj), grips, speeds, params,
                     runs=int(cfg.get("runs", 3)))
    if grid.size == 0:
        parser.error("the sweep grid is empty")
    return grid


def cmd_sweep(args, parser, argv: list[str]) -> int:
    cfg = _load_config(args.config, "sweep", parser) if args.config else {}
    grid = _resolve_grid(args, cfg, parser)
    config = _sim_config(args, cfg, parser)
    ov = _overrides(grid.primitive, args, cfg, parser)
    out = _out_dir(args)

    rows = run_sweep(grid, config, **ov)
    with (out / "report.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.index, r.object_id, repr(r.grip), repr(r.speed),
                        repr(r.param), int(r.ok), r.failure, r.steps,
                        repr(r.peak_pusher_force), repr(r.slide_down_mm),
                        repr(r.rotation_deg), repr(r.finger_asymmetry),
                        repr(r.max_net_residual)])

    n_ok = sum(r.ok for r in rows)
    _write_json(out / "summary.json", {
        "cells": len(rows), "succeeded": n_ok, "failed": len(rows) - n_ok,
        "wall_time_s": sum(r.wall_time for r in rows),
    })
    # materialize the shared per-cell settings from a probe scenario; if
    # even the first cell is unbuildable, fall back to the raw overrides
    manifest_cfg = {
        "primitive": grid.primitive, "object": grid.object_id,
        "grips": list(grid.grips), "speeds": list(grid.speeds),
        "params": list(grid.params), "runs": grid.runs,
        "dt": config.dt, "mode": config.mode,
    }
    try:
        probe = build_scenario(grid.primitive, grid.object_id, grid.grips[0],
                               grid.speeds[0], grid.params[0], **ov)
        manifest_cfg.update(
            mu_finger=probe.mu_finger, mu_pusher=probe.mu_pusher,
            facets=[probe.finger_facets, probe.pusher_facets])
    except ValueError:
        mp = ov.get("mu_pusher", ov.get("mu_platform"))
        manifest_cfg.update(
            mu_finger=ov.get("mu_finger"), mu_pusher=mp,
            facets=[ov["finger_facets"], ov["pusher_facets"]]
            if "finger_facets" in ov else None)
    _write_manifest(out, "sweep", argv, manifest_cfg, [],
                    [out / "report.csv", out / "summary.json"])
    print(f"{grid.primitive} sweep on {grid.object_id}: {n_ok}/{len(rows)} "
          f"cells succeeded -> {out}")
    if n_ok == 0:
        return _fail("every sweep cell failed")
    return EXIT_OK


_BOUNDS_COLUMNS = ("patch", "point", "px", "py", "pz", "fx", "fy", "fz",
                   "x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi",
                   "normal_lo", "normal_hi", "t1_lo", "t1_hi",
                   "t2_lo", "t2_hi", "tangential_width")

_AXES = ("fx", "fy", "fz", "tx", "ty", "tz")


def cmd_bounds(args, parser, argv: list[str]) -> int:
    cfg = _load_config(args.config, "bounds", parser) if args.config else {}
    sc = _resolve_scenario(args, cfg, parser)
    config = _sim_config(args, cfg, parser)
    t_raw = _pick(args, cfg, "time")
    t = sc.duration / 2.0 if t_raw is None else float(t_raw)
    out = _out_dir(args)
    if not 0.0 <= t <= sc.duration:
        return _fail(f"instant t={t:g}s is outside the trial "
                     f"[0, {sc.duration:g}]s; no contact state to bound")

    state = SimState(pose=sc.initial_pose(), twist=Twist.zero(), time=0.0)
    try:
        for _ in range(int(round(t / config.dt))):
            cs = sc.contact_set(state.pose, state.time)
            state, _ = step(state, cs, config, sc.mass_props)
        cs = sc.contact_set(state.pose, state.time)
        rep = force_resolution_bounds(state, cs, config, sc.mass_props)
    except SolverFailure as e:
        return _fail(f"nominal solve failed at t={state.time:.3f}s: {e}")

    with (out / "bounds.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_BOUNDS_COLUMNS)
        for i, patch in enumerate(rep.point_patches):
            vals = [*rep.point_positions[i], *rep.nominal_forces[i],
                    *rep.point_intervals[i].ravel(), rep.tangential_width(i)]
            w.writerow([patch, i] + [repr(float(v)) for v in vals])

    spread = rep.net_wrench_interval[:, 1] - rep.net_wrench_interval[:, 0]
    _write_json(out / "bounds.json", {
        "time_s": state.time,
        "points": len(rep.point_patches),
        "patch_intervals": {
            name: {ax: [float(iv[a, 0]), float(iv[a, 1])]
                   for a, ax in enumerate(_AXES)}
            for name, iv in sorted(rep.patch_intervals.items())},
        "net_wrench_nominal": [float(v) for v in rep.nominal_net],
        "net_wrench_interval": [[float(lo), float(hi)]
                                for lo, hi in rep.net_wrench_interval],
        "net_wrench_spread": [float(v) for v in spread],
        "max_tangential_width": float(np.max(rep.tangential_widths())),
    })
    mcfg = _scenario_config(sc, config)
    mcfg["time"] = t
    _write_manifest(out, "bounds", argv, mcfg, [],
                    [out / "bounds.csv", out / "bounds.json"])
    print(f"{sc.name} at t={state.time:.3f}s: {len(rep.point_patches)} contact "
          f"points, max tangential width "
          f"{float(np.max(rep.tangential_widths())):.3f} N, net-wrench spread "
          f"{float(np.max(np.abs(spread))):.2e} -> {out}")
    return EXIT_OK


def cmd_compare(args, parser, argv: list[str]) -> int:
    cfg = _load_config(args.config, "compare", parser) if args.config else {}
    shift = _pick(args, cfg, "max_shift")
    shift = 0.5 if shift is None else float(shift)
    try:
        sim = load_log(args.sim_log)
        ref = load_log(args.ref_log)
        report = compare_logs(sim, ref, max_shift=shift)
    except OSError as e:
        parser.error(f"cannot read trial log: {e}")
    except TrialLogError as e:
        parser.error(str(e))
    out = _out_dir(args)
    doc = asdict(report)
    doc["sim_log"] = str(args.sim_log)
    doc["ref_log"] = str(args.ref_log)
    _write_json(out / "comparison.json", doc)
    _write_manifest(out, "compare", argv, {"max_shift": shift},
                    [args.sim_log, args.ref_log], [out / "comparison.json"])
    print(f"overlap {report.n_overlap} frames at offset "
          f"{report.timing_offset_s:+.3f}s; worst channel "
          f"{report.worst_channel} (rms {report.worst_rms:.3f}), slide delta "
          f"{report.slide_down_delta_mm:+.3f} mm, rotation delta "
          f"{report.rotation_delta_deg:+.3f} deg -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="inhandpush",
        description="Quasi-static simulation of grasped objects pushed "
                    "against external contacts.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default ./out)")
    common.add_argument("--config", metavar="JSON",
                        help="JSON settings file; flags override it, and a "
                             "run manifest.json is accepted")
    common.add_argument("--dt", type=float, help="time step in s (default 0.004)")
    common.add_argument("--mode", help="quasi_dynamic (default) or dynamic")
    common.add_argument("--mu-finger", dest="mu_finger", type=float,
                        help="override the finger-pad friction coefficient")
    common.add_argument("--mu-pusher", dest="mu_pusher", type=float,
                        help="override the external-contact friction coefficient")
    common.add_argument("--facets", metavar="F,P",
                        help="friction-cone facet counts: finger pads, pusher")
    common.add_argument("--seed-free", dest="seed_free", action="store_true",
                        help="reserved; the solver is deterministic and "
                             "rejects this flag")

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--primitive", metavar="NAME",
                      help="linear-push, pivot, or roll")
    scen.add_argument("--object", dest="object_id", metavar="ID",
                      help="object id, e.g. obj4")
    scen.add_argument("--grip", type=float, metavar="N", help="grip force in N")
    scen.add_argument("--vel", type=float, metavar="V",
                      help="speed: mm/s (linear push, roll) or deg/s (pivot)")
    scen.add_argument("--slope", type=float, metavar="DEG",
                      help="wall slope in degrees (linear push only)")
    scen.add_argument("--offset", type=float, metavar="MM",
                      help="pusher offset from center in mm (pivot only)")

    ps = sub.add_parser("simulate", parents=[common, scen],
                        help="run one trial and export it as a trial log")
    ps.set_defaults(func=cmd_simulate)

    pw = sub.add_parser("sweep", parents=[common],
                        help="run a parameter grid and tabulate the metrics")
    pw.add_argument("--grid", metavar="NAME",
                    help=f"named grid: {', '.join(sorted(GRID_ALIASES))}")
    pw.add_argument("--primitive", metavar="NAME",
                    help="primitive for a custom grid from --config")
    pw.add_argument("--object", dest="object_id", metavar="ID",
                    help="object id (overrides the named grid's default)")
    pw.set_defaults(func=cmd_sweep)

    pb = sub.add_parser("bounds", parents=[common, scen],
                        help="force-resolution intervals at one instant")
    pb.add_argument("--time", type=float, metavar="T",
                    help="instant in s (default: mid-trial)")
    pb.set_defaults(func=cmd_bounds)

    pc = sub.add_parser("compare", parents=[common],
                        help="score a simulated trial log against a recorded one")
    pc.add_argument("sim_log", metavar="SIM_CSV")
    pc.add_argument("ref_log", metavar="REF_CSV")
    pc.add_argument("--max-shift", dest="max_shift", type=float, metavar="S",
                    help="largest time alignment to search, in s (default 0.5)")
    pc.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "seed_free", False):
            parser.error("--seed-free is reserved: the solver draws no random "
                         "numbers, so there is nothing to seed")
        return args.func(args, parser, argv)
    except SystemExit as e:
        if e.code in (0, None):
            return EXIT_OK
        return e.code if isinstance(e.code, int) else EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
