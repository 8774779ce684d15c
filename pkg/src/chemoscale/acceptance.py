"""Ten-part verification battery covering every headline property end to end.

Each item rebuilds its own inputs, runs the relevant solver or fitter at a
frozen configuration, and reduces the outcome to a single pass/fail verdict
with the measured numbers attached.  Items are independent except for the
parameter sweep, which the throughput and scaling items share through the
optional cache argument of `run_criterion`.

Two items currently fail, and the failures are informative rather than
accidental: their detail strings carry the measured spreads together with
matched re-measurements that localize exactly where the stated form of the
bound loses steepness uniformity.  The README summarizes both.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import exp1

from .fokker_planck import (
    dual_solve,
    duality_invariant,
    fp_solve,
    stationary_state,
    transport_front,
    verify_linfty,
)
from .grid import build_graded_grid, profile_from_function
from .harness import SweepConfig, expand_points, fit_scaling, run_point
from .poincare import (
    best_constant,
    standard_battery,
    verify_block_inequalities,
    verify_combined,
    verify_power_weight,
    verify_truncated,
)
from .potential import annulus_potential, ground_state_weight
from .reaction import (
    Params,
    coupled_solve,
    half_time,
    initial_shell,
    initial_target,
    tau_d_lower_bound,
    verify_mass_comparison,
    verify_pass_through,
)

__all__ = [
    "CRITERION_IDS",
    "CriterionResult",
    "run_criterion",
    "run_all",
    "format_result",
]

CRITERION_IDS = (
    "scheme-exactness",
    "dissipation-identity",
    "duality-invariant",
    "poincare-suite",
    "sharpness-witness",
    "linfty-bound",
    "transport-front",
    "mass-comparison",
    "pass-through",
    "half-time-scalings",
)


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of one verification item.

    `measured` is a one-line summary of the numbers behind the verdict;
    `detail` is the multi-line breakdown for reports and debugging.
    """

    cid: str
    passed: bool
    measured: str
    detail: str
    seconds: float

    def __post_init__(self):
        if self.cid not in CRITERION_IDS:
            raise ValueError(f"unknown criterion id {self.cid!r}")


def format_result(res: CriterionResult) -> str:
    verdict = "PASS" if res.passed else "FAIL"
    return f"criterion {res.cid}: {verdict} ({res.measured}) [{res.seconds:.1f}s]"


# --- 1: exact stationarity and conservation ----------------------------------


def _check_scheme_exactness(cache):
    worst_step = 0.0
    worst_drift = 0.0
    worst_mass = 0.0
    lines = []
    for gamma in (16.0, 64.0):
        pot = annulus_potential(gamma)
        grid = build_graded_grid(8.0, gamma)
        eq = stationary_state(1.0, pot, grid)
        top = float(np.max(eq.values))
        # a single large implicit step and a 20-step run from the equilibrium;
        # the face weighting makes both exact up to linear-algebra roundoff
        one = fp_solve(eq, pot, 0.1, dt_max=0.1, cfl=1e9, frame_times=np.array([0.0, 0.1]))
        d1 = float(np.max(np.abs(one.frames[-1] - eq.values))) / top
        long = fp_solve(eq, pot, 2.0, dt_max=0.1, cfl=1e9, frame_times=np.array([0.0, 2.0]))
        n_steps = long.diag_times.size - 1
        d20 = float(np.max(np.abs(long.frames[-1] - eq.values))) / top / n_steps
        bump = profile_from_function(grid, lambda r: np.exp(-3.0 * (r - 2.0) ** 2))
        tr = fp_solve(bump, pot, 1.0, dt_max=0.01)
        m, t = tr.diag_mass, tr.diag_times
        rate = float(np.max(np.abs(m[1:] - m[0]) / (m[0] * t[1:])))
        worst_step = max(worst_step, d1)
        worst_drift = max(worst_drift, d20)
        worst_mass = max(worst_mass, rate)
        lines.append(
            f"steepness {gamma:g}: one-step defect {d1:.2e}, "
            f"{n_steps}-step drift {d20:.2e}/step, mass drift {rate:.2e}/unit time"
        )
    passed = worst_step <= 1e-12 and worst_drift <= 1e-12 and worst_mass <= 1e-10
    measured = (
        f"equilibrium defect {worst_step:.1e}/step, long-run {worst_drift:.1e}/step "
        f"(bound 1e-12); mass drift {worst_mass:.1e}/unit time (bound 1e-10)"
    )
    return passed, measured, "\n".join(lines)


# --- 2: energy dissipation identity ------------------------------------------


def _dissipation_residual(dt_max: float, n_frames: int) -> float:
    """Worst relative residual of dZ/dt = -2W along a mid-range tracer bump."""
    pot = annulus_potential(32.0)
    grid = build_graded_grid(10.0, 32.0)
    f0 = profile_from_function(grid, lambda r: np.exp(-4.0 * (r - 5.0) ** 2))
    T = 1.0
    traj = dual_solve(f0, pot, T, dt_max=dt_max, frame_times=np.linspace(0.0, T, n_frames))
    z, w = traj.z_w_series()
    t = traj.times
    floor = 1e-12 * float(np.max(w))
    worst = 0.0
    for i in range(1, t.size - 1):
        if w[i] <= floor:
            continue
        dz = (z[i + 1] - z[i - 1]) / (t[i + 1] - t[i - 1])
        worst = max(worst, abs(dz + 2.0 * w[i]) / w[i])
    return worst


def _check_dissipation_identity(cache):
    ref = _dissipation_residual(0.0008, 101)
    fine = _dissipation_residual(0.0004, 201)
    ratio = fine / ref if ref > 0 else math.inf
    passed = ref <= 0.02 and ratio <= 0.6
    measured = (
        f"identity residual {100 * ref:.2f}% at reference (bound 2%), "
        f"{100 * fine:.2f}% refined, ratio {ratio:.2f} (bound 0.6)"
    )
    detail = (
        "dual run at steepness 32 from a bump at radius 5, horizon 1.0;\n"
        f"reference: step 8e-4, 101 frames -> {ref:.6f}\n"
        f"refined:   step 4e-4, 201 frames -> {fine:.6f}"
    )
    return passed, measured, detail


# --- 3: forward/adjoint pairing invariance -----------------------------------


def _check_duality_invariant(cache):
    pot = annulus_potential(16.0)
    grid = build_graded_grid(6.0, 16.0)
    rho0 = profile_from_function(grid, lambda r: np.exp(-3.0 * (r - 0.5) ** 2))
    f0 = profile_from_function(grid, lambda r: 1.0 / (1.0 + r * r))
    T = 0.5
    drifts = []
    for k in range(3):
        ft = np.linspace(0.0, T, 16 * 2**k + 1)
        rt = fp_solve(rho0, pot, T, dt_max=0.0015 / 2**k, frame_times=ft)
        dj = dual_solve(f0, pot, T, dt_max=0.000925 / 2**k, frame_times=ft)
        drifts.append(duality_invariant(rt, dj, T, n_samples=37))
    orders = [math.log2(drifts[i] / drifts[i + 1]) for i in range(len(drifts) - 1)]
    passed = drifts[0] <= 1e-3 and min(orders) >= 1.0
    measured = (
        f"pairing drift {drifts[0]:.2e} at reference (bound 1e-3), refinement "
        f"orders {'/'.join(f'{o:.2f}' for o in orders)} (bound >= 1)"
    )
    detail = "\n".join(
        f"level {k}: step pair ({0.0015 / 2**k:g}, {0.000925 / 2**k:g}), "
        f"{16 * 2**k + 1} frames -> drift {d:.3e}"
        for k, d in enumerate(drifts)
    )
    return passed, measured, detail


# --- 4: variance-vs-energy inequality suite ----------------------------------

_FAMILY_ORDER = (
    "core-block",
    "transition-block",
    "far-block",
    "summed-variance",
    "far-block-truncated",
    "summed-truncated",
    "power-weight-split",
)


def _check_poincare_suite(cache):
    gammas = (16.0, 32.0, 64.0, 128.0)
    per: dict[str, dict[float, float]] = {name: {} for name in _FAMILY_ORDER}
    for gamma in gammas:
        w = ground_state_weight(gamma)
        grid = build_graded_grid(8.0, gamma, extra_edges=(4.0,))
        worst = dict.fromkeys(_FAMILY_ORDER, 0.0)
        for _, mode in standard_battery(grid):
            blocks = verify_block_inequalities([mode], w)
            comb = verify_combined([mode], w)
            trunc = verify_truncated([mode], w, R=4.0)
            worst["core-block"] = max(worst["core-block"], blocks.c1)
            worst["transition-block"] = max(worst["transition-block"], blocks.c2)
            worst["far-block"] = max(worst["far-block"], blocks.c3)
            worst["summed-variance"] = max(worst["summed-variance"], comb.fitted_c)
            worst["far-block-truncated"] = max(worst["far-block-truncated"], trunc.c3_truncated)
            worst["summed-truncated"] = max(worst["summed-truncated"], trunc.fitted_c_combined)
            if gamma >= 32.0:
                pw = verify_power_weight([mode], gamma)
                worst["power-weight-split"] = max(worst["power-weight-split"], pw.fitted_c)
        for name, val in worst.items():
            if val > 0.0:
                per[name][gamma] = val

    spreads = {}
    lines = []
    for name in _FAMILY_ORDER:
        by_gamma = per[name]
        vals = list(by_gamma.values())
        spreads[name] = max(vals) / min(vals)
        series = ", ".join(f"{g:g}: {by_gamma[g]:.4g}" for g in sorted(by_gamma))
        ok = "ok" if spreads[name] < 2.0 else "exceeds x2"
        lines.append(f"{name}: spread x{spreads[name]:.3f} ({ok}); C by steepness {{{series}}}")
    failing = [name for name in _FAMILY_ORDER if not spreads[name] < 2.0]
    passed = not failing
    if failing:
        measured = f"{len(failing)} of {len(spreads)} family constants exceed x2: " + ", ".join(
            f"{name} x{spreads[name]:.1f}" for name in failing
        )
    else:
        worst_name = max(spreads, key=spreads.get)
        measured = f"all {len(spreads)} family constants within x2 (worst {worst_name} x{spreads[worst_name]:.2f})"
    lines.append(
        "constant per steepness = smallest C valid for every battery item; the "
        "transition and far block constants grow close to linearly and "
        "quadratically in the steepness, so their spread over the 8x range is "
        "structural; the summed forms absorb the growth and stay within x2"
    )
    lines.append("the algebraic-weight split is defined for steepness >= 32, so its spread covers 32..128")
    return passed, measured, "\n".join(lines)


# --- 5: far-field extremal scaling -------------------------------------------


def _check_sharpness_witness(cache):
    vals = {}
    for gamma in (16.0, 32.0, 64.0, 128.0):
        w = ground_state_weight(gamma)
        grid = build_graded_grid(30.0, gamma)
        res = best_constant(w, grid, region="far")
        if not res.converged:
            return False, f"far-region extremal solve did not converge at steepness {gamma:g}", ""
        vals[gamma] = res.value
    gs = sorted(vals)
    slope = float(np.polyfit(np.log(gs), np.log([vals[g] for g in gs]), 1)[0])
    passed = -2.3 < slope < -1.7
    measured = f"far extremal ratio slope {slope:.3f} vs steepness (want -2 +/- 0.3)"
    detail = "\n".join(f"steepness {g:g}: extremal ratio {vals[g]:.6g}" for g in gs)
    return passed, measured, detail


# --- 6: parabolic sup bound --------------------------------------------------


def _check_linfty_bound(cache):
    fits = {}
    worst_t = {}
    for gamma in (16.0, 64.0):
        pot = annulus_potential(gamma)
        grid = build_graded_grid(8.0, gamma)
        spike = profile_from_function(grid, lambda r: np.exp(-((r / 0.1) ** 2)))
        rep = verify_linfty(fp_solve(spike, pot, 10.0, dt_max=0.002))
        fits[gamma] = rep.fitted_c
        worst_t[gamma] = rep.worst_time
    spread = max(fits.values()) / min(fits.values())
    in_window = all(0.01 <= worst_t[g] <= 10.0 for g in worst_t)
    finite = all(math.isfinite(c) and c > 0 for c in fits.values())
    passed = finite and in_window and spread <= 2.0
    measured = (
        f"sup-bound constant {fits[16.0]:.4f} / {fits[64.0]:.4f} across steepness "
        f"16/64 (spread x{spread:.2f}, bound x2)"
    )
    detail = "\n".join(
        f"steepness {g:g}: fitted C {fits[g]:.5f}, binding at t = {worst_t[g]:.4f}"
        for g in sorted(fits)
    )
    return passed, measured, detail


# --- 7: outward front of the adjoint flow ------------------------------------


def _check_transport_front(cache):
    reports = {}
    for gamma, r_max in ((32.0, 40.0), (64.0, 56.0), (128.0, 80.0)):
        pot = annulus_potential(gamma)
        grid = build_graded_grid(r_max, gamma)
        f0 = profile_from_function(grid, lambda r: np.where(r <= 1.0, 1.0, 0.0))
        traj = dual_solve(
            f0, pot, 50.0, dt_max=0.02, cfl=4.0, frame_times=np.linspace(0.0, 50.0, 101)
        )
        reports[gamma] = transport_front(traj, gamma)
    station_floor = min(rep.station_min for rep in reports.values())
    first = next(iter(reports.values()))
    spreads = {}
    for lv in first.level_radii:
        los = [rep.level_radii[lv] for rep in reports.values()]
        his = [rep.level_radii[lv] * rep.level_stability[lv] for rep in reports.values()]
        if min(los) > 0 and all(math.isfinite(h) for h in his):
            spreads[lv] = max(his) / min(los)
    if not spreads:
        return False, "no level stays positive at every steepness", ""
    best_lv = min(spreads, key=spreads.get)
    passed = station_floor >= 0.48 and spreads[best_lv] <= 2.0
    measured = (
        f"station floor {station_floor:.3f} (bound 0.48); front coefficient "
        f"spread x{spreads[best_lv]:.3f} at level {best_lv:g} (bound x2)"
    )
    lines = [
        f"steepness {g:g}: station min {rep.station_min:.4f}, level {best_lv:g} "
        f"coefficient {rep.level_radii[best_lv]:.4f} "
        f"(in-window wobble x{rep.level_stability[best_lv]:.4f})"
        for g, rep in sorted(reports.items())
    ]
    lines.append("window t in [1, 50], station radius 5/7, coefficient = front radius / sqrt(1 + steepness * t)")
    return passed, measured, "\n".join(lines)


# --- 8: ball-mass domination on the reference coupled run --------------------


def _check_mass_comparison(cache):
    L, gamma, eps, M0 = 10.0, 64.0, 0.1, 1e4
    params = Params(chi=gamma, eps=eps, theta=1.0, M0=M0, L=L)
    width = 1.0
    grid = build_graded_grid(
        1.6 * (L + width), gamma, n_far=48, extra_edges=(L - width, L + width)
    )
    rho1 = initial_shell(grid, L, M0, width=width)
    rho2 = initial_target(grid, params.theta)
    T = L * L / gamma + 2.0
    traj = coupled_solve(params, rho1, rho2, T=T, cfl=4.0, frame_times=np.linspace(0.0, T, 65))
    ht = half_time(traj)
    if not ht.reached:
        return False, f"reference run never reached its half-time within T={T:g}", ""
    rep = verify_mass_comparison(traj, params)
    passed = rep.ok
    measured = (
        f"{rep.n_violations} violations over {rep.n_frames_checked} frames at "
        f"tolerance {rep.tolerance:g} (bound: zero)"
    )
    detail = (
        f"separation 10, steepness 64, mobile mass 1e4, consumption 0.1;\n"
        f"half-time {rep.tau_c:.4f}; worst margin {rep.worst_margin:+.4e} "
        f"(negative beyond {rep.tolerance:g} would count)"
    )
    return passed, measured, detail


# --- 9 and 10 share one sweep ------------------------------------------------

_SWEEP_KEY = "half-time-sweep"


def _sweep_records(cache):
    """3x3 sweep over separation and steepness at fixed consumption budget.

    Returns (config, records, {steepness: (record, trajectory)}) with the
    trajectories kept only for the smallest separation, where the throughput
    item re-measures at matched horizons.
    """
    got = cache.get(_SWEEP_KEY)
    if got is None:
        cfg = SweepConfig(
            L_values=(10.0, 20.0, 40.0),
            gamma_values=(32.0, 64.0, 128.0),
            eps_values=(0.1,),
            mass_eps_over_gamma=10.0,
        )
        records = []
        trajs = {}
        for i, (_, L, g, e, m) in enumerate(expand_points(cfg)):
            rec, traj = run_point(cfg, i, L, g, e, m)
            records.append(rec)
            if L == 10.0 and traj is not None:
                trajs[g] = (rec, traj)
        got = (cfg, records, trajs)
        cache[_SWEEP_KEY] = got
    return got


def _check_pass_through(cache):
    cfg, records, trajs = _sweep_records(cache)
    gammas = (32.0, 64.0, 128.0)
    missing = [g for g in gammas if g not in trajs]
    if missing:
        return False, f"sweep rows failed at steepness {missing}", ""
    cs = {}
    matched = {}
    for g in gammas:
        rec, traj = trajs[g]
        cs[g] = rec.passthrough_c
        params = Params(chi=g / cfg.theta, eps=rec.eps, theta=cfg.theta, M0=rec.M0, L=rec.L)
        matched[g] = verify_pass_through(traj, params, t_end=rec.tau_C).fitted_c
    spread = max(cs.values()) / min(cs.values())
    m_spread = max(matched.values()) / min(matched.values())
    positive = all(c > 0 for c in cs.values())
    passed = positive and spread <= 2.0
    measured = (
        f"throughput constant spread x{spread:.2f} across steepness at the "
        f"one-unit window (bound x2); all positive: {positive}"
    )
    lines = [
        "window half-time + 1: c = "
        + " / ".join(f"{cs[g]:.4f}" for g in gammas)
        + f" (spread x{spread:.3f})",
        "window half-time only: c = "
        + " / ".join(f"{matched[g]:.4f}" for g in gammas)
        + f" (spread x{m_spread:.3f})",
        "after the target is half depleted the annulus keeps accumulating mobile "
        "mass at a rate proportional to steepness / separation^2, so a fixed "
        "absolute window inflates the constant at high steepness; at horizons "
        "matched to the dynamics the constant is steepness-stable",
    ]
    return passed, measured, "\n".join(lines)


def _check_half_time_scalings(cache):
    cfg, records, _ = _sweep_records(cache)
    bad = [rec.run_id for rec in records if rec.status != "ok"]
    if bad:
        return False, f"sweep rows failed: {', '.join(bad)}", ""

    slopes_a = {}
    for g in cfg.gamma_values:
        fit = fit_scaling([r for r in records if r.gamma == g], "tau_C", "L")
        slopes_a[g] = fit.slope
    ok_a = all(1.7 <= s <= 2.3 for s in slopes_a.values())

    fit_b = fit_scaling([r for r in records if r.L == 40.0], "tau_C", "gamma")
    ok_b = -1.3 <= fit_b.slope <= -0.7

    cfg_c = SweepConfig(
        L_values=(10.0,), gamma_values=(32.0,), eps_values=(0.1,), M0_values=(1e3, 1e4, 1e5)
    )
    ratios = {}
    for i, (_, L, g, e, m) in enumerate(expand_points(cfg_c)):
        rec, _t = run_point(cfg_c, i, L, g, e, m)
        if rec.status != "ok" or not math.isfinite(rec.tau_D):
            return False, f"baseline run at budget {m * e:g} failed: {rec.status}", ""
        ratios[m * e] = rec.tau_D / (L * L / math.log(m * e))
    spread_c = max(ratios.values()) / min(ratios.values())
    ok_c = spread_c < 3.0

    def _params_of(rec):
        return Params(chi=rec.gamma / cfg.theta, eps=rec.eps, theta=cfg.theta, M0=rec.M0, L=rec.L)

    in_regime = [rec for rec in records if _params_of(rec).in_regime]
    ok_d_sweep = all(rec.tau_C < rec.tau_D / 5.0 for rec in in_regime)
    cfg_d = SweepConfig(
        L_values=(10.0,), gamma_values=(128.0,), eps_values=(0.1,), mass_eps_over_gamma=100.0
    )
    (_, Ld, gd, ed, md) = expand_points(cfg_d)[0]
    rec_d, _t = run_point(cfg_d, 0, Ld, gd, ed, md)
    params_d = Params(chi=gd, eps=ed, theta=1.0, M0=md, L=Ld)
    ok_d = (
        ok_d_sweep
        and rec_d.status == "ok"
        and params_d.in_regime
        and rec_d.tau_C < rec_d.tau_D / 5.0
    )

    # the analytic floor must agree with an independent inversion of the
    # exponential-integral relation it encodes
    worst_rel = 0.0
    probes = [Params(chi=32.0, eps=0.1, theta=1.0, M0=m, L=10.0) for m in (1e3, 1e4, 1e5)]
    probes.append(params_d)
    for p in probes:
        lb = tau_d_lower_bound(p)
        rhs = 4.0 * math.pi * math.log(2.0) / (p.M0 * p.eps)
        x = brentq(lambda u: exp1(u) - rhs, 1e-18, 700.0, xtol=1e-30)
        oracle = 0.25 * p.L**2 / x
        worst_rel = max(worst_rel, abs(lb - oracle) / oracle)
    ok_e = worst_rel <= 1e-6

    passed = ok_a and ok_b and ok_c and ok_d and ok_e
    measured = (
        f"separation slopes {'/'.join(f'{slopes_a[g]:.2f}' for g in cfg.gamma_values)} "
        f"(want [1.7, 2.3]); steepness slope {fit_b.slope:.2f} (want [-1.3, -0.7]); "
        f"baseline ratio spread x{spread_c:.2f} (bound x3); regime split holds; "
        f"floor inversion err {worst_rel:.1e}"
    )
    lines = [
        "(a) half-time vs separation slope by steepness: "
        + ", ".join(f"{g:g}: {slopes_a[g]:.4f}" for g in cfg.gamma_values)
        + (" [ok]" if ok_a else " [out of range]"),
        f"(b) half-time vs steepness slope at separation 40: {fit_b.slope:.4f}"
        + (" [ok]" if ok_b else " [out of range]"),
        "(c) baseline half-time / (separation^2 / log budget): "
        + ", ".join(f"{k:g}: {v:.4f}" for k, v in sorted(ratios.items()))
        + f" -> spread x{spread_c:.3f}" + (" [ok]" if ok_c else " [out of range]"),
        f"(d) {len(in_regime)} sweep rows in the full largeness regime (all hold); "
        f"dedicated in-regime row: half-time {rec_d.tau_C:.4f} < baseline/5 = "
        f"{rec_d.tau_D / 5.0:.4f}" + (" [ok]" if ok_d else " [violated]"),
        f"(e) analytic floor vs independent inversion: worst relative error {worst_rel:.2e}"
        + (" [ok]" if ok_e else " [out of range]"),
    ]
    return passed, measured, "\n".join(lines)


# --- dispatch ----------------------------------------------------------------

_CHECKS = {
    "scheme-exactness": _check_scheme_exactness,
    "dissipation-identity": _check_dissipation_identity,
    "duality-invariant": _check_duality_invariant,
    "poincare-suite": _check_poincare_suite,
    "sharpness-witness": _check_sharpness_witness,
    "linfty-bound": _check_linfty_bound,
    "transport-front": _check_transport_front,
    "mass-comparison": _check_mass_comparison,
    "pass-through": _check_pass_through,
    "half-time-scalings": _check_half_time_scalings,
}


def run_criterion(cid: str, cache: dict | None = None) -> CriterionResult:
    """Run one verification item; pass the same `cache` dict to share the sweep."""
    if cid not in _CHECKS:
        raise ValueError(
            f"unknown criterion id {cid!r}; choose from {', '.join(CRITERION_IDS)}"
        )
    if cache is None:
        cache = {}
    t0 = time.perf_counter()
    passed, measured, detail = _CHECKS[cid](cache)
    return CriterionResult(
        cid=cid,
        passed=bool(passed),
        measured=measured,
        detail=detail,
        seconds=time.perf_counter() - t0,
    )


def run_all(ids=None) -> list[CriterionResult]:
    """Run the battery in order; `ids` restricts to a subset, keeping order."""
    if ids is None:
        ids = CRITERION_IDS
    bad = [c for c in ids if c not in _CHECKS]
    if bad:
        raise ValueError(f"unknown criterion ids {bad!r}")
    cache: dict = {}
    return [run_criterion(cid, cache) for cid in ids]
