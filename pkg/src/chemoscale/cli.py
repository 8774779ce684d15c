"""Command line front end.

Subcommands map one-to-one onto the package's workflows:

  simulate       one coupled run, saved with its full trajectory
  fokker-planck  one forward or adjoint run of the linear transport flow
  poincare       the inequality battery report for one or more steepness values
  sweep          the parameter sweep with its CSV report
  verify         the ten-part verification battery

Every subcommand reads an optional JSON config and lets individual flags
override single keys; ``verify --check <id>`` runs one item and exits
nonzero when it fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .acceptance import CRITERION_IDS, format_result, run_all, run_criterion
from .fokker_planck import dual_solve, fp_solve, stationary_state, write_frames
from .grid import build_graded_grid, profile_from_function
from .harness import SCHEMA_VERSION, SweepConfig, emit_csv, expand_points, run_point, run_sweep
from .poincare import battery_report, write_report_csv
from .potential import annulus_potential, ground_state_weight
from .reaction import save_trajectory

__all__ = ["main"]

FP_SCHEMA = "chemoscale-fp-v1"
POINCARE_SCHEMA = "chemoscale-poincare-v1"

_FP_DEFAULTS = {
    "kind": "forward",
    "gamma": 16.0,
    "r_max": 8.0,
    "T": 1.0,
    "dt_max": 0.01,
    "cfl": 1.0,
    "n_frames": 33,
    "init": {"shape": "gaussian", "center": 2.0, "width": 0.5, "height": 1.0},
}

_POINCARE_DEFAULTS = {
    "gammas": [16.0, 32.0, 64.0, 128.0],
    "r_max": 8.0,
    "truncation_edge": 4.0,
}

_SWEEP_KEYS = tuple(f.name for f in fields(SweepConfig))


def _json_value(text: str):
    """Flag override values: JSON when it parses, bare string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_override_flags(parser: argparse.ArgumentParser, keys) -> None:
    group = parser.add_argument_group("config key overrides")
    for key in keys:
        group.add_argument(
            "--" + key.replace("_", "-"),
            dest=f"key_{key}",
            metavar="VALUE",
            default=None,
            help=f"override config key {key!r} (JSON fragment)",
        )


def _collect_config(args, keys, schema: str) -> dict:
    if args.config is not None:
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
    else:
        raw = {"schema": schema}
    for key in keys:
        v = getattr(args, f"key_{key}")
        if v is not None:
            raw[key] = _json_value(v)
    return raw


def _check_schema(raw: dict, schema: str, defaults: dict) -> dict:
    if raw.get("schema") != schema:
        raise ValueError(f"config schema must be {schema!r}, got {raw.get('schema')!r}")
    unknown = sorted(set(raw) - set(defaults) - {"schema"})
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    merged = dict(defaults)
    merged.update({k: v for k, v in raw.items() if k != "schema"})
    return merged


def _write_sweep_outputs(cfg: SweepConfig, records, target) -> None:
    """Same files, bytes and layout as a sweep run writes for this config."""
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out / "runs.csv")
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _record_line(rec) -> str:
    if rec.status != "ok":
        return f"run {rec.run_id}: status={rec.status}"
    return (
        f"run {rec.run_id}: status=ok tau_C={rec.tau_C:.6g} tau_D={rec.tau_D:.6g} "
        f"throughput_c={rec.passthrough_c:.6g} mass_ordering={'ok' if rec.masscmp_ok else 'VIOLATED'}"
    )


# --- subcommands -------------------------------------------------------------


def _cmd_simulate(args) -> int:
    raw = _collect_config(args, _SWEEP_KEYS, SCHEMA_VERSION)
    cfg = SweepConfig.from_dict(raw)
    points = expand_points(cfg)
    if len(points) != 1:
        raise ValueError(
            f"simulate needs exactly one parameter tuple, this config expands to {len(points)}"
        )
    _, L, gamma, eps, M0 = points[0]
    rec, traj = run_point(cfg, 0, L, gamma, eps, M0)
    target = cfg.out_dir if args.out is None else args.out
    if target is not None:
        _write_sweep_outputs(cfg, [rec], target)
        if traj is not None:
            save_trajectory(traj, Path(target) / "trajectory")
        print(f"wrote {Path(target) / 'runs.csv'}")
    print(_record_line(rec))
    return 0 if rec.status == "ok" else 1


def _cmd_fokker_planck(args) -> int:
    raw = _collect_config(args, tuple(_FP_DEFAULTS), FP_SCHEMA)
    cfg = _check_schema(raw, FP_SCHEMA, _FP_DEFAULTS)
    gamma = float(cfg["gamma"])
    pot = annulus_potential(gamma)
    grid = build_graded_grid(float(cfg["r_max"]), gamma)
    init = cfg["init"]
    shape = init.get("shape", "gaussian")
    if shape == "gaussian":
        c, wdt, h = float(init.get("center", 2.0)), float(init.get("width", 0.5)), float(init.get("height", 1.0))
        prof = profile_from_function(grid, lambda r: h * np.exp(-(((r - c) / wdt) ** 2)))
    elif shape == "ball":
        rad, h = float(init.get("radius", 1.0)), float(init.get("height", 1.0))
        prof = profile_from_function(grid, lambda r: np.where(r <= rad, h, 0.0))
    elif shape == "stationary":
        prof = stationary_state(float(init.get("mass", 1.0)), pot, grid)
    else:
        raise ValueError(f"unknown init shape {shape!r}; use gaussian, ball, or stationary")
    if cfg["kind"] not in ("forward", "dual"):
        raise ValueError(f"kind must be 'forward' or 'dual', got {cfg['kind']!r}")
    T = float(cfg["T"])
    solver = fp_solve if cfg["kind"] == "forward" else dual_solve
    traj = solver(
        prof,
        pot,
        T,
        dt_max=float(cfg["dt_max"]),
        cfl=float(cfg["cfl"]),
        frame_times=np.linspace(0.0, T, int(cfg["n_frames"])),
    )
    n_steps = traj.diag_times.size - 1
    print(
        f"{cfg['kind']} run: steepness {gamma:g}, horizon {T:g}, {n_steps} steps, "
        f"{traj.frames.shape[0]} frames on {grid.n_cells} cells"
    )
    z, w = traj.z_w_series()
    print(f"energy {z[0]:.6g} -> {z[-1]:.6g}; final dissipation rate {w[-1]:.6g}")
    if args.out is not None:
        path = write_frames(traj, args.out, tag=cfg["kind"])
        print(f"wrote {path}")
    return 0


def _cmd_poincare(args) -> int:
    raw = _collect_config(args, tuple(_POINCARE_DEFAULTS), POINCARE_SCHEMA)
    cfg = _check_schema(raw, POINCARE_SCHEMA, _POINCARE_DEFAULTS)
    edge = float(cfg["truncation_edge"])
    for gamma in [float(g) for g in cfg["gammas"]]:
        w = ground_state_weight(gamma)
        grid = build_graded_grid(float(cfg["r_max"]), gamma, extra_edges=(edge,))
        rows = battery_report(w, grid)
        worst: dict[str, float] = {}
        for row in rows:
            worst[row.inequality_id] = max(worst.get(row.inequality_id, 0.0), row.fitted_C)
        summary = ", ".join(f"{k}={v:.4g}" for k, v in sorted(worst.items()))
        print(f"steepness {gamma:g}: worst constants {summary}")
        if args.out is not None:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            path = write_report_csv(out / f"battery_g{gamma:g}.csv", rows)
            print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    raw = _collect_config(args, _SWEEP_KEYS, SCHEMA_VERSION)
    cfg = SweepConfig.from_dict(raw)
    records = run_sweep(cfg, args.out)
    for rec in records:
        print(_record_line(rec))
    n_ok = sum(rec.status == "ok" for rec in records)
    target = cfg.out_dir if args.out is None else args.out
    if target is not None:
        print(f"wrote {Path(target) / 'runs.csv'}")
    print(f"{n_ok} of {len(records)} runs ok")
    return 0 if n_ok == len(records) else 1


def _cmd_verify(args) -> int:
    if args.check is not None:
        results = [run_criterion(args.check)]
    else:
        results = run_all()
    for res in results:
        print(format_result(res))
        if args.detail and res.detail:
            for line in res.detail.splitlines():
                print(f"    {line}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = [asdict(res) for res in results]
        with open(out / "verify.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {out / 'verify.json'}")
    return 0 if all(res.passed for res in results) else 1


# --- entry point -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chemoscale",
        description="radial chemotaxis-and-consumption toolkit: solvers, sweeps, verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="FILE.json", default=None, help="JSON config file")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")

    p = sub.add_parser("simulate", help="one coupled run with its trajectory saved")
    common(p)
    _add_override_flags(p, _SWEEP_KEYS)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("fokker-planck", help="one forward or adjoint linear run")
    common(p)
    _add_override_flags(p, tuple(_FP_DEFAULTS))
    p.set_defaults(fn=_cmd_fokker_planck)

    p = sub.add_parser("poincare", help="inequality battery report")
    common(p)
    _add_override_flags(p, tuple(_POINCARE_DEFAULTS))
    p.set_defaults(fn=_cmd_poincare)

    p = sub.add_parser("sweep", help="parameter sweep with CSV report")
    common(p)
    _add_override_flags(p, _SWEEP_KEYS)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("verify", help="run the verification battery")
    common(p)
    p.add_argument("--check", metavar="ID", choices=CRITERION_IDS, default=None,
                   help="run a single criterion: " + ", ".join(CRITERION_IDS))
    p.add_argument("--detail", action="store_true", help="print the multi-line breakdowns")
    p.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
