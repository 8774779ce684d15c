"""Parameter sweeps over the coupled solver, scaling fits, and flat-file reports.

A sweep is a cartesian product over (L, gamma, eps, M0) axes.  Each tuple gets
a coupled run (half-times, pass-through, mass comparison) and optionally a
diffusion-only baseline for the no-drift half-time, all folded into one record
per run.  Failures are quarantined in the record's status field rather than
aborting the sweep.  Emission is deterministic: the same config and seed
produce byte-identical CSV.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import build_graded_grid
from .reaction import (
    Params,
    coupled_solve,
    diffusion_baseline_solve,
    half_time,
    initial_shell,
    initial_target,
    tau_d_lower_bound,
    verify_mass_comparison,
    verify_pass_through,
)

__all__ = [
    "SCHEMA_VERSION",
    "CSV_COLUMNS",
    "SweepConfig",
    "RunRecord",
    "ScalingFit",
    "expand_points",
    "run_sweep",
    "run_point",
    "fit_scaling",
    "emit_csv",
    "load_records",
    "emit_svg",
]

SCHEMA_VERSION = "chemoscale-sweep-v1"

CSV_COLUMNS = (
    "run_id",
    "L",
    "gamma",
    "eps",
    "M0",
    "theta",
    "chi",
    "tau_C",
    "tau_C_quarter",
    "tau_D",
    "tau_D_lb",
    "t3_fitted",
    "passthrough_c",
    "masscmp_ok",
    "grid_n",
    "r_max",
    "status",
)


@dataclass(frozen=True)
class SweepConfig:
    """Axes and policies for one sweep.

    M0 comes either from an explicit ``M0_values`` axis or, when
    ``mass_eps_over_gamma`` is set, from the constraint M0*eps/gamma = ratio
    applied tuple by tuple; exactly one of the two must be given.  The grid is
    graded to the core scale 1/gamma with the mobile shell bracketed by exact
    edges; ``r_max_factor`` scales the outer wall off the shell radius.
    """

    L_values: tuple[float, ...]
    gamma_values: tuple[float, ...]
    eps_values: tuple[float, ...]
    M0_values: tuple[float, ...] = ()
    mass_eps_over_gamma: float | None = None
    theta: float = 1.0
    r_max_factor: float = 1.6
    n_far: int = 48
    t_end_factor: float = 1.0
    max_extends: int = 3
    dt_max: float = 0.05
    cfl: float = 4.0
    baseline: bool = True
    seed: int = 0
    shell_width_jitter: float = 0.0
    max_runs: int = 512
    workers: int = 1
    out_dir: str = "sweep-out"

    def __post_init__(self):
        for name in ("L_values", "gamma_values", "eps_values", "M0_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if name != "M0_values" and not vals:
                raise ValueError(f"{name} must be a nonempty list")
            if any(not v > 0 for v in vals):
                raise ValueError(f"{name} must be positive")
        has_axis = bool(self.M0_values)
        has_ratio = self.mass_eps_over_gamma is not None
        if has_axis == has_ratio:
            raise ValueError(
                "give exactly one of M0_values or mass_eps_over_gamma"
            )
        if has_ratio and not self.mass_eps_over_gamma > 0:
            raise ValueError("mass_eps_over_gamma must be positive")
        if not 0.0 <= self.shell_width_jitter <= 0.5:
            raise ValueError("shell_width_jitter must be in [0, 0.5]")
        if self.r_max_factor <= 1.0:
            raise ValueError("r_max_factor must exceed 1")
        if self.workers < 1 or self.max_extends < 0:
            raise ValueError("workers must be >= 1 and max_extends >= 0")
        n = self.n_points()
        if n > self.max_runs:
            raise ValueError(
                f"sweep would launch {n} runs, above the cap {self.max_runs}"
            )

    def n_points(self) -> int:
        m = len(self.M0_values) if self.M0_values else 1
        return len(self.L_values) * len(self.gamma_values) * len(self.eps_values) * m

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA_VERSION}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        if raw.get("schema") != SCHEMA_VERSION:
            raise ValueError(
                f"config schema must be {SCHEMA_VERSION!r}, got {raw.get('schema')!r}"
            )
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known - {"schema"})
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {k: v for k, v in raw.items() if k != "schema"}
        for name in ("L_values", "gamma_values", "eps_values", "M0_values"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class RunRecord:
    """One CSV row of the sweep report; NaN marks a quantity that was not
    produced (failed or skipped run)."""

    run_id: str
    L: float
    gamma: float
    eps: float
    M0: float
    theta: float = 1.0
    chi: float = math.nan
    tau_C: float = math.nan
    tau_C_quarter: float = math.nan
    tau_D: float = math.nan
    tau_D_lb: float = math.nan
    t3_fitted: float = math.nan
    passthrough_c: float = math.nan
    masscmp_ok: bool | None = None
    grid_n: int = 0
    r_max: float = math.nan
    status: str = "ok"


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares power law fit log(response) = intercept + slope*log(axis)."""

    slope: float
    intercept: float
    r_squared: float
    axis: str
    response: str
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError("fit produced non-finite coefficients")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared must lie in [0, 1]")


def expand_points(cfg: SweepConfig) -> list[tuple[str, float, float, float, float]]:
    """Deterministic (run_id, L, gamma, eps, M0) tuples in axis-nesting order."""
    out = []
    idx = 0
    for L in cfg.L_values:
        for gamma in cfg.gamma_values:
            for eps in cfg.eps_values:
                if cfg.M0_values:
                    m0s: Sequence[float] = cfg.M0_values
                else:
                    m0s = (cfg.mass_eps_over_gamma * gamma / eps,)
                for M0 in m0s:
                    out.append((f"r{idx:03d}", L, gamma, eps, M0))
                    idx += 1
    return out


def _shell_width(cfg: SweepConfig, idx: int) -> float:
    if cfg.shell_width_jitter == 0.0:
        return 1.0
    u = float(np.random.default_rng([cfg.seed, idx]).random())
    return 1.0 + cfg.shell_width_jitter * (2.0 * u - 1.0)


def run_point(
    cfg: SweepConfig, idx: int, L: float, gamma: float, eps: float, M0: float
):
    """Run one sweep tuple; returns (record, coupled trajectory or None).

    The trajectory comes back so a direct single-run caller can persist it;
    quarantined failures return (record-with-status, None).
    """
    run_id = f"r{idx:03d}"
    base = RunRecord(run_id=run_id, L=L, gamma=gamma, eps=eps, M0=M0, theta=cfg.theta)
    try:
        width = _shell_width(cfg, idx)
        params = Params(chi=gamma / cfg.theta, eps=eps, theta=cfg.theta, M0=M0, L=L)
        grid = build_graded_grid(
            cfg.r_max_factor * (L + width),
            gamma,
            n_far=cfg.n_far,
            extra_edges=(L - width, L + width),
        )
        rho1 = initial_shell(grid, L, M0, width=width)
        rho2 = initial_target(grid, cfg.theta)

        T = cfg.t_end_factor * L * L / gamma + 2.0
        traj = ht = None
        for _ in range(cfg.max_extends + 1):
            traj = coupled_solve(
                params,
                rho1,
                rho2,
                T=T,
                dt_max=cfg.dt_max,
                cfl=cfg.cfl,
                frame_times=np.linspace(0.0, T, 65),
            )
            ht = half_time(traj)
            if ht.reached and ht.tau + 1.0 <= traj.times[-1]:
                break
            T *= 2.0
        if not (ht.reached and ht.tau + 1.0 <= traj.times[-1]):
            return replace(base, status="not-reached", grid_n=grid.n_cells,
                           r_max=grid.r_max, chi=params.chi), None

        lb = tau_d_lower_bound(params)
        tau_d = math.nan
        if cfg.baseline:
            tau_d = _baseline_half_time(cfg, params, rho1, rho2, lb)
        mc = verify_mass_comparison(traj, params)
        pt = verify_pass_through(traj, params)
        rec = replace(
            base,
            chi=params.chi,
            tau_C=ht.tau,
            tau_C_quarter=half_time(traj, fraction=0.25).tau,
            tau_D=tau_d,
            tau_D_lb=lb,
            t3_fitted=pt.t_end,
            passthrough_c=pt.fitted_c,
            masscmp_ok=mc.ok,
            grid_n=grid.n_cells,
            r_max=grid.r_max,
        )
        return rec, traj
    except Exception as exc:  # quarantine: the sweep must outlive one bad tuple
        return replace(base, status=f"failed:{type(exc).__name__}"), None


def _baseline_half_time(cfg, params, rho1, rho2, lb) -> float:
    """Half-time of the no-drift run, horizon seeded by the analytic bound."""
    T = 2.5 * lb
    for _ in range(cfg.max_extends + 1):
        base = diffusion_baseline_solve(
            params,
            rho1,
            rho2,
            T=T,
            dt_max=T / 400.0,
            cfl=1e12,
            frame_times=[T],
        )
        ht = half_time(base)
        if ht.reached:
            return ht.tau
        T *= 2.0
    return math.inf


def _run_task(args):
    cfg, idx, L, gamma, eps, M0 = args
    return run_point(cfg, idx, L, gamma, eps, M0)[0]


def run_sweep(cfg: SweepConfig, out_dir: str | Path | None = None) -> list[RunRecord]:
    """Execute every tuple of the sweep; never drops a failure silently.

    With out_dir (or cfg.out_dir when it is not overridden to None) the report
    CSV and the resolved config land on disk.
    """
    tasks = [
        (cfg, i, L, g, e, m)
        for i, (_, L, g, e, m) in enumerate(expand_points(cfg))
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]

    target = cfg.out_dir if out_dir is None else out_dir
    if target is not None:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(records, out / "runs.csv")
        with open(out / "config.json", "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return records


# --- fitting -----------------------------------------------------------------

_AXIS_LABELS = ("L", "gamma", "logM0eps")


def _axis_value(rec: RunRecord, axis: str) -> float:
    if axis == "L":
        return rec.L
    if axis == "gamma":
        return rec.gamma
    if axis == "logM0eps":
        return math.log(rec.M0 * rec.eps)
    raise ValueError(f"axis must be one of {_AXIS_LABELS}, got {axis!r}")


def fit_scaling(
    records: Iterable[RunRecord], response: str = "tau_C", axis: str = "L"
) -> ScalingFit:
    """Log-log least squares of a response column against one sweep axis.

    Only records with status ``ok`` and a finite, positive response enter the
    fit.  The caller is responsible for holding the other axes fixed; this
    function only refuses degenerate inputs.
    """
    if response not in ("tau_C", "tau_C_quarter", "tau_D", "tau_D_lb", "passthrough_c"):
        raise ValueError(f"unknown response column {response!r}")
    xs, ys = [], []
    for rec in records:
        y = getattr(rec, response)
        x = _axis_value(rec, axis)
        if rec.status == "ok" and math.isfinite(y) and y > 0 and x > 0:
            xs.append(math.log(x))
            ys.append(math.log(y))
    if len(xs) < 3:
        raise ValueError(f"need at least 3 usable points on axis {axis}, got {len(xs)}")
    x = np.array(xs)
    y = np.array(ys)
    if np.ptp(x) < 1e-12:
        raise ValueError(f"degenerate spread: axis {axis} takes a single value")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=min(max(r2, 0.0), 1.0),
        axis=axis,
        response=response,
        n_points=len(xs),
    )


# --- emission ----------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.17g}"
    return str(v)


def emit_csv(records: Iterable[RunRecord], path: str | Path) -> Path:
    """Write the sweep report; floats at full precision, NaN as empty cell."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CSV_COLUMNS)
            for rec in records:
                d = asdict(rec)
                wr.writerow([_cell(d[c]) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"writing sweep report {path}: {exc}") from exc
    return path


def load_records(path: str | Path) -> list[RunRecord]:
    """Parse a file produced by emit_csv back into records."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path} does not carry the sweep report header")
    out = []
    for row in rows[1:]:
        d = dict(zip(CSV_COLUMNS, row))
        out.append(
            RunRecord(
                run_id=d["run_id"],
                L=float(d["L"]),
                gamma=float(d["gamma"]),
                eps=float(d["eps"]),
                M0=float(d["M0"]),
                theta=float(d["theta"]),
                chi=float(d["chi"]) if d["chi"] else math.nan,
                tau_C=float(d["tau_C"]) if d["tau_C"] else math.nan,
                tau_C_quarter=float(d["tau_C_quarter"]) if d["tau_C_quarter"] else math.nan,
                tau_D=float(d["tau_D"]) if d["tau_D"] else math.nan,
                tau_D_lb=float(d["tau_D_lb"]) if d["tau_D_lb"] else math.nan,
                t3_fitted=float(d["t3_fitted"]) if d["t3_fitted"] else math.nan,
                passthrough_c=float(d["passthrough_c"]) if d["passthrough_c"] else math.nan,
                masscmp_ok={"true": True, "false": False, "": None}[d["masscmp_ok"]],
                grid_n=int(d["grid_n"]),
                r_max=float(d["r_max"]) if d["r_max"] else math.nan,
                status=d["status"],
            )
        )
    return out


def emit_svg(
    fit: ScalingFit,
    path: str | Path,
    points: Sequence[tuple[float, float]] = (),
) -> Path:
    """Log-log scatter of (axis, response) pairs with the fitted line.

    Self-contained SVG, no external viewer assumptions beyond basic shapes.
    """
    path = Path(path)
    W, H, M = 640, 480, 60
    pts = [(x, y) for x, y in points if x > 0 and y > 0]
    if pts:
        lxs = [math.log10(x) for x, _ in pts]
        lys = [math.log10(y) for _, y in pts]
        x_lo, x_hi = min(lxs) - 0.1, max(lxs) + 0.1
        y_lo, y_hi = min(lys) - 0.1, max(lys) + 0.1
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi - x_lo < 1e-9:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi - y_lo < 1e-9:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def sx(lx: float) -> float:
        return M + (lx - x_lo) / (x_hi - x_lo) * (W - 2 * M)

    def sy(ly: float) -> float:
        return H - M - (ly - y_lo) / (y_hi - y_lo) * (H - 2 * M)

    ln10 = math.log(10.0)
    # fitted line in natural-log space mapped onto the log10 canvas
    line = [
        (sx(lx), sy((fit.intercept + fit.slope * lx * ln10) / ln10))
        for lx in (x_lo, x_hi)
    ]
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="{M}" y="{M}" width="{W - 2 * M}" height="{H - 2 * M}" '
        'fill="none" stroke="#444"/>',
        f'<line x1="{line[0][0]:.2f}" y1="{line[0][1]:.2f}" '
        f'x2="{line[1][0]:.2f}" y2="{line[1][1]:.2f}" stroke="#c33" stroke-width="2"/>',
    ]
    for x, y in pts:
        parts.append(
            f'<circle cx="{sx(math.log10(x)):.2f}" cy="{sy(math.log10(y)):.2f}" '
            'r="4" fill="#226"/>'
        )
    parts.append(
        f'<text x="{M}" y="{M - 14}" font-family="monospace" font-size="14">'
        f"{fit.response} vs {fit.axis}: slope {fit.slope:.3f} "
        f"(R2 {fit.r_squared:.3f}, n={fit.n_points})</text>"
    )
    parts.append(
        f'<text x="{W // 2}" y="{H - 18}" font-family="monospace" font-size="13" '
        f'text-anchor="middle">log10 {fit.axis}</text>'
    )
    parts.append("</svg>")
    try:
        path.write_text("\n".join(parts) + "\n")
    except OSError as exc:
        raise OSError(f"writing figure {path}: {exc}") from exc
    return path
