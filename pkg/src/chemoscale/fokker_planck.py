"""Drift-diffusion evolution on radial grids with exponential-fitting fluxes.

The scheme discretizes d/dt rho = div(grad rho - rho grad H) in conservation
form.  Face fluxes use Bernoulli weighting of the potential difference across
the face, which makes the cell-sampled exp(H) an exact discrete steady state,
keeps the implicit step an M-matrix (positivity and maximum principles hold
unconditionally), and conserves mass to solver roundoff.  The adjoint flow
(advected tracer) is the exact conjugation of the same step by exp(H), so the
discrete forward/adjoint pairing telescopes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import ProfileKind, RadialGrid, RadialProfile
from .numerics import TridiagonalSPD, bernoulli_weight
from .potential import AnnulusPotential

__all__ = [
    "FPTrajectory",
    "MilestoneConstants",
    "MilestoneTimes",
    "DecayBoundReport",
    "SupBoundReport",
    "TransportFrontReport",
    "MassConcentrationReport",
    "TransportOperator",
    "fp_solve",
    "dual_solve",
    "stationary_state",
    "z_and_w",
    "duality_invariant",
    "milestone_times",
    "verify_decay_bound",
    "verify_linfty",
    "transport_front",
    "threshold_decompose",
    "mass_in_ball_from_Z",
    "write_frames",
]

NEGATIVITY_TOL = 1e-10


def _potential_values(pot, grid: RadialGrid) -> np.ndarray:
    """Accept a closed-form potential, a profile, or a raw array of H at centers."""
    if isinstance(pot, AnnulusPotential):
        return np.asarray(pot.eval_H(grid.centers), dtype=float)
    if isinstance(pot, RadialProfile):
        if pot.kind is not ProfileKind.POTENTIAL:
            raise ValueError("potential profile must have kind POTENTIAL")
        return np.asarray(pot.values, dtype=float)
    arr = np.asarray(pot, dtype=float)
    if arr.shape != (grid.n_cells,):
        raise ValueError("potential array must give H at every cell center")
    return arr


class TransportOperator:
    """Assembled face data for one potential on one grid; builds implicit steps."""

    def __init__(self, grid: RadialGrid, h_centers: np.ndarray):
        self.grid = grid
        self.h = np.asarray(h_centers, dtype=float)
        c = grid.centers
        self.dh = np.diff(self.h)                       # H_{i+1} - H_i per face
        self.dr = np.diff(c)                            # center spacing per face
        self.face_r = grid.edges[1:-1]
        self.geom = 2.0 * math.pi * self.face_r / self.dr
        self.b_out = bernoulli_weight(-self.dh)         # multiplies the left cell
        self.b_in = bernoulli_weight(self.dh)           # multiplies the right cell
        self._solvers: dict[tuple[float, int], tuple] = {}

    def cfl_dt(self) -> float:
        """Accuracy step: min over faces of spacing / drift speed."""
        speed = np.abs(self.dh) / self.dr
        with np.errstate(divide="ignore"):
            dts = np.where(speed > 0.0, self.dr / np.maximum(speed, 1e-300), np.inf)
        return float(np.min(dts)) if dts.size else np.inf

    def flux_divergence(self, rho: np.ndarray) -> np.ndarray:
        """d(V rho)/dt: net outward Bernoulli flux differences per cell."""
        j = self.geom * (self.b_out * rho[:-1] - self.b_in * rho[1:])
        out = np.zeros_like(rho)
        out[:-1] -= j
        out[1:] += j
        return out

    def _factor(self, dt: float, sink: np.ndarray | None):
        """Cholesky of the symmetrized implicit matrix (V(1+dt*s) - dt*R) D."""
        v = self.grid.volumes
        n = v.size
        diag_r = np.zeros(n)
        diag_r[:-1] -= self.geom * self.b_out
        diag_r[1:] -= self.geom * self.b_in
        up = self.geom * self.b_in       # R[i, i+1]
        lo = self.geom * self.b_out      # R[i+1, i]
        m_diag = v.copy()
        if sink is not None:
            m_diag = v * (1.0 + dt * sink)
        m_diag = m_diag - dt * diag_r
        shift = float(np.max(self.h))
        d = np.exp(self.h - shift)
        sym_diag = m_diag * d
        sym_off = -dt * up * d[1:]       # equals -dt * lo * d[:-1] by detailed balance
        return TridiagonalSPD(sym_diag, sym_off), d

    def implicit_step(self, rho: np.ndarray, dt: float, sink: np.ndarray | None = None) -> np.ndarray:
        """Backward-Euler update of the cell densities; optional linear sink rate."""
        key = (dt, id(sink)) if sink is None else None
        if key is not None and key in self._solvers:
            solver, d = self._solvers[key]
        else:
            solver, d = self._factor(dt, sink)
            if key is not None:
                if len(self._solvers) > 8:
                    self._solvers.clear()
                self._solvers[key] = (solver, d)
        y = solver.solve(rho * self.grid.volumes)
        return y * d

    def dirichlet_energy(self, f: np.ndarray) -> float:
        """Face-summed weighted Dirichlet form matching the discrete dissipation.

        Uses the log-mean face weight B(dH) e^{H_{i+1}} so that the identity
        dZ/dt = -2W is exact for the semi-discrete flow.
        """
        shift = float(np.max(self.h))
        face_w = self.b_in * np.exp(self.h[1:] - shift)
        df = np.diff(f)
        return float(np.exp(shift) * np.sum(self.geom * face_w * df * df))


@dataclass
class FPTrajectory:
    """Saved frames of a forward density or adjoint tracer run."""

    grid: RadialGrid
    h_centers: np.ndarray
    kind: str                      # "forward" | "dual"
    times: np.ndarray
    frames: np.ndarray             # (n_frames, n_cells)
    diag_times: np.ndarray
    diag_mass: np.ndarray
    diag_sup: np.ndarray
    dt_max: float
    cfl: float

    _op: TransportOperator | None = field(default=None, repr=False)

    @property
    def op(self) -> TransportOperator:
        if self._op is None:
            self._op = TransportOperator(self.grid, self.h_centers)
        return self._op

    def frame(self, i: int) -> RadialProfile:
        return RadialProfile(grid=self.grid, values=self.frames[i], kind=ProfileKind.DENSITY)

    def at_time(self, t: float) -> np.ndarray:
        """Linear interpolation between saved frames."""
        times = self.times
        if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
            raise ValueError(f"time {t} outside saved range [{times[0]}, {times[-1]}]")
        j = int(np.clip(np.searchsorted(times, t) - 1, 0, times.size - 2))
        t0, t1 = times[j], times[j + 1]
        lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        lam = min(max(lam, 0.0), 1.0)
        return (1.0 - lam) * self.frames[j] + lam * self.frames[j + 1]

    def conserved_mass(self, i: int) -> float:
        """Plain mass for forward runs; exp(H)-weighted content for dual runs."""
        if self.kind == "forward":
            return float(np.dot(self.frames[i], self.grid.volumes))
        shift = float(np.max(self.h_centers))
        return float(
            np.exp(shift)
            * np.sum(self.frames[i] * np.exp(self.h_centers - shift) * self.grid.volumes)
        )

    def z_w_series(self) -> tuple[np.ndarray, np.ndarray]:
        """Weighted variance Z and dissipation W per frame (tracer form)."""
        zs, ws = [], []
        for i in range(self.times.size):
            z, w = z_and_w(self._tracer(i), self.h_centers, self.grid, op=self.op)
            zs.append(z)
            ws.append(w)
        return np.array(zs), np.array(ws)

    def _tracer(self, i: int) -> np.ndarray:
        if self.kind == "dual":
            return self.frames[i]
        return self.frames[i] * np.exp(-(self.h_centers - np.min(self.h_centers))) * math.exp(
            -float(np.min(self.h_centers))
        )


def _run(
    state: np.ndarray,
    op: TransportOperator,
    T: float,
    dt_max: float,
    cfl: float,
    frame_times: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, list[float], list[float], list[float]]:
    dt_policy = min(dt_max, cfl * op.cfl_dt())
    if dt_policy < 1e-13 * max(T, 1.0):
        raise ValueError(
            f"stable step {dt_policy:.3e} underflows the horizon; the potential is "
            "too stiff for this grid"
        )
    v = op.grid.volumes
    frames = [state.copy()]
    diag_t, diag_m, diag_s = [0.0], [float(np.dot(state, v))], [float(np.max(np.abs(state)))]
    t = 0.0
    k = 1
    while t < T - 1e-12 * max(T, 1.0):
        stop = frame_times[k] if k < frame_times.size else T
        dt = min(dt_policy, stop - t)
        state = op.implicit_step(state, dt)
        t += dt
        diag_t.append(t)
        diag_m.append(float(np.dot(state, v)))
        diag_s.append(float(np.max(np.abs(state))))
        if t >= stop - 1e-12 * max(T, 1.0):
            frames.append(state.copy())
            k += 1
    return np.array(frames), np.asarray(frame_times, dtype=float), diag_t, diag_m, diag_s


def _normalize_frame_times(frame_times, T: float) -> np.ndarray:
    if frame_times is None:
        frame_times = np.linspace(0.0, T, 33)
    frame_times = np.asarray(frame_times, dtype=float)
    if frame_times[0] != 0.0:
        frame_times = np.concatenate(([0.0], frame_times))
    if abs(frame_times[-1] - T) > 1e-12 * max(T, 1.0):
        frame_times = np.concatenate((frame_times, [T]))
    if np.any(np.diff(frame_times) <= 0):
        raise ValueError("frame times must be strictly increasing")
    return frame_times


def fp_solve(
    rho0: RadialProfile,
    pot,
    T: float,
    *,
    dt_max: float = 0.05,
    cfl: float = 1.0,
    frame_times=None,
) -> FPTrajectory:
    """Forward drift-diffusion run from a density; no-flux walls at 0 and r_max."""
    if rho0.kind is not ProfileKind.DENSITY:
        raise ValueError("fp_solve expects a density profile")
    if T <= 0:
        raise ValueError("horizon must be positive")
    h = _potential_values(pot, rho0.grid)
    op = TransportOperator(rho0.grid, h)
    ft = _normalize_frame_times(frame_times, T)
    frames, times, dt_, dm, ds = _run(rho0.values.copy(), op, T, dt_max, cfl, ft)
    _check_negativity(frames)
    return FPTrajectory(
        grid=rho0.grid,
        h_centers=h,
        kind="forward",
        times=times,
        frames=frames,
        diag_times=np.array(dt_),
        diag_mass=np.array(dm),
        diag_sup=np.array(ds),
        dt_max=dt_max,
        cfl=cfl,
        _op=op,
    )


def dual_solve(
    f0: RadialProfile,
    pot,
    T: float,
    *,
    dt_max: float = 0.05,
    cfl: float = 1.0,
    frame_times=None,
) -> FPTrajectory:
    """Adjoint advected-tracer run: conserves the exp(H)-weighted content.

    Implemented as the exact exp(H) conjugation of the forward step, so the
    discrete maximum principle (values stay in the initial range) holds to
    roundoff.
    """
    if f0.kind is not ProfileKind.DENSITY:
        raise ValueError("dual_solve expects a density-kind profile of tracer values")
    if T <= 0:
        raise ValueError("horizon must be positive")
    h = _potential_values(pot, f0.grid)
    op = TransportOperator(f0.grid, h)
    shift = float(np.max(h))
    rho_repr = f0.values * np.exp(h - shift)
    ft = _normalize_frame_times(frame_times, T)
    frames, times, dt_, dm, ds = _run(rho_repr, op, T, dt_max, cfl, ft)
    back = np.exp(shift - h)
    frames = frames * back[None, :]
    sup0 = float(np.max(np.abs(f0.values)))
    traj = FPTrajectory(
        grid=f0.grid,
        h_centers=h,
        kind="dual",
        times=times,
        frames=frames,
        diag_times=np.array(dt_),
        diag_mass=np.array(
            [
                float(np.exp(shift) * np.sum(fr * np.exp(h - shift) * f0.grid.volumes))
                for fr in frames
            ]
        ),
        diag_sup=np.array([float(np.max(np.abs(fr))) for fr in frames]),
        dt_max=dt_max,
        cfl=cfl,
        _op=op,
    )
    if sup0 > 0 and float(np.max(traj.frames)) > sup0 * (1.0 + 1e-8):
        raise AssertionError("discrete maximum principle violated; scheme bug")
    return traj


def _check_negativity(frames: np.ndarray):
    top = float(np.max(np.abs(frames)))
    if float(np.min(frames)) < -NEGATIVITY_TOL * max(top, 1e-300):
        raise AssertionError("negative density beyond tolerance; scheme bug")


def stationary_state(total_mass: float, pot, grid: RadialGrid) -> RadialProfile:
    """Normalized exp(H) with the requested mass."""
    if total_mass < 0:
        raise ValueError("mass must be nonnegative")
    h = _potential_values(pot, grid)
    shift = float(np.max(h))
    raw = np.exp(h - shift)
    z = float(np.sum(raw * grid.volumes))
    return RadialProfile(grid=grid, values=total_mass * raw / z, kind=ProfileKind.DENSITY)


def _weighted_mean(f: np.ndarray, h: np.ndarray, vols: np.ndarray) -> float:
    shift = float(np.max(h))
    w = np.exp(h - shift) * vols
    return float(np.sum(f * w) / np.sum(w))


def z_and_w(
    f: np.ndarray | RadialProfile,
    pot,
    grid: RadialGrid | None = None,
    *,
    mode_n: int = 0,
    op: TransportOperator | None = None,
) -> tuple[float, float]:
    """Weighted variance Z = int (f - fbar)^2 e^H dx and dissipation W.

    W is the face-summed Dirichlet form whose pairing with Z makes the
    semi-discrete identity dZ/dt = -2W exact; for angular mode n an extra
    n^2/r^2 zeroth-order term enters W.
    """
    if isinstance(f, RadialProfile):
        grid = f.grid
        f = f.values
    if grid is None:
        raise ValueError("grid required when f is a bare array")
    h = _potential_values(pot, grid)
    if op is None:
        op = TransportOperator(grid, h)
    f = np.asarray(f, dtype=float)
    fbar = _weighted_mean(f, h, grid.volumes) if mode_n == 0 else 0.0
    dev = f - fbar
    shift = float(np.max(h))
    z = float(np.exp(shift) * np.sum(dev * dev * np.exp(h - shift) * grid.volumes))
    w = op.dirichlet_energy(f)
    if mode_n > 0:
        w += float(
            np.exp(shift)
            * np.sum((mode_n**2) * f * f / grid.centers**2 * np.exp(h - shift) * grid.volumes)
        )
    return z, w


def duality_invariant(
    rho_traj: FPTrajectory,
    f_traj: FPTrajectory,
    t: float,
    n_samples: int = 41,
) -> float:
    """Max relative drift of the forward/adjoint pairing over s in [0, t].

    The pairing int (rho(s) - rho_inf)(f(t-s) - fbar) dx is constant in s for
    the continuum flow; frames are interpolated, so the reported drift mixes
    time-discretization and interpolation error and shrinks under refinement.
    """
    if rho_traj.kind != "forward" or f_traj.kind != "dual":
        raise ValueError("need a forward trajectory and a dual trajectory")
    if not np.array_equal(rho_traj.grid.edges, f_traj.grid.edges):
        raise ValueError("trajectories must share a grid")
    grid = rho_traj.grid
    h = rho_traj.h_centers
    mass = float(np.dot(rho_traj.frames[0], grid.volumes))
    rho_inf = stationary_state(mass, h, grid).values
    fbar = _weighted_mean(f_traj.frames[0], h, grid.volumes)
    samples = np.linspace(0.0, t, n_samples)
    u = np.array(
        [
            float(np.sum((rho_traj.at_time(s) - rho_inf) * (f_traj.at_time(t - s) - fbar) * grid.volumes))
            for s in samples
        ]
    )
    z_rho, _ = z_and_w(rho_traj._tracer(0), h, grid)
    z_f, _ = z_and_w(f_traj.frames[0], h, grid)
    cauchy = math.sqrt(max(z_rho * z_f, 1e-300))
    scale = abs(u[0]) if abs(u[0]) > 1e-6 * cauchy else cauchy
    return float(np.max(np.abs(u - u[0])) / max(scale, 1e-300))


@dataclass(frozen=True)
class MilestoneConstants:
    """Configurable prefactors for the relaxation milestones (fitted defaults)."""

    c_entry: float = 1.0
    c_spread: float = 1.0
    c_total: float = 1.0


@dataclass(frozen=True)
class MilestoneTimes:
    t1: float
    t2: float
    t3: float
    z_sigma: float
    q1: float
    q2: float
    sigma: float
    gamma: float
    rho0_mass: float
    log_f0_sup: float

    def __post_init__(self):
        if not self.t1 <= self.t2:
            raise AssertionError("milestone ordering violated")


def milestone_times(
    rho0: RadialProfile,
    pot: AnnulusPotential,
    sigma: float = 1e-3,
    constants: MilestoneConstants = MilestoneConstants(),
) -> MilestoneTimes:
    """Relaxation milestones for the steep-potential flow started from rho0.

    Defined only for gamma > 8: below that the far field has no spectral
    room and the decay estimates are empty.
    """
    gamma = pot.gamma
    if gamma <= 8.0:
        raise ValueError("milestones need gamma > 8; the far tail is too heavy below that")
    if not 0.0 < sigma <= 1.0:
        raise ValueError("sigma must lie in (0, 1]")
    grid = rho0.grid
    h = pot.eval_H(grid.centers)
    mass = float(np.dot(rho0.values, grid.volumes))
    if mass <= 0:
        raise ValueError("rho0 must carry positive mass")
    pos = rho0.values > 0
    log_f0_sup = float(np.max(np.log(rho0.values[pos]) - h[pos]))
    h0 = pot.plateau_value
    t1 = constants.c_entry * (1.0 + math.log(1.0 / sigma) + math.log(gamma))
    ratio_log = log_f0_sup - math.log(math.sqrt(sigma) * mass)
    t2 = t1 + (constants.c_spread / gamma) * math.exp(ratio_log * 16.0 / (gamma - 8.0))
    ratio_log3 = log_f0_sup - math.log(sigma * mass)
    t3 = constants.c_total * (t1 + (1.0 / gamma) * math.exp(ratio_log3 * 8.0 / (gamma - 8.0)))
    z_sigma = sigma * math.exp(-h0) * mass**2
    q1 = gamma**2 * mass**2 * math.exp(-h0)
    q2 = gamma**2 * mass**2 * math.exp(-float(pot.eval_H(0.75)))
    return MilestoneTimes(
        t1=t1,
        t2=t2,
        t3=t3,
        z_sigma=z_sigma,
        q1=q1,
        q2=q2,
        sigma=sigma,
        gamma=gamma,
        rho0_mass=mass,
        log_f0_sup=log_f0_sup,
    )


@dataclass(frozen=True)
class DecayBoundReport:
    fitted_c: float
    z_monotone: bool
    sigma_floor_time: float | None
    frames_used: int


def verify_decay_bound(f_traj: FPTrajectory, milestones: MilestoneTimes) -> DecayBoundReport:
    """Largest admissible rate constant in the two-regime decay envelope.

    For every frame past t1 with Z above the sigma floor, the envelope needs
    (c * gamma * (t - t1))^(-(gamma-8)/8) * sup(f0)^2 >= Z(t); the report fits
    the largest c that works for all frames (positive means the bound holds
    with some universal constant).
    """
    z, _ = f_traj.z_w_series()
    gamma = milestones.gamma
    t1 = milestones.t1
    monotone = bool(np.all(np.diff(z) <= 1e-10 * max(z[0], 1e-300)))
    sup2_log = 2.0 * math.log(max(float(np.max(np.abs(f_traj.frames[0]))), 1e-300))
    fitted = np.inf
    used = 0
    floor_t = None
    for t, zt in zip(f_traj.times, z):
        if zt <= milestones.z_sigma:
            if floor_t is None:
                floor_t = float(t)
            continue
        if t <= t1:
            continue
        used += 1
        c_t = math.exp((sup2_log - math.log(zt)) * 8.0 / (gamma - 8.0)) / (gamma * (t - t1))
        fitted = min(fitted, c_t)
    return DecayBoundReport(
        fitted_c=float(fitted) if used else math.inf,
        z_monotone=monotone,
        sigma_floor_time=floor_t,
        frames_used=used,
    )


@dataclass(frozen=True)
class SupBoundReport:
    fitted_c: float
    worst_time: float


def verify_linfty(traj: FPTrajectory) -> SupBoundReport:
    """Smallest C with sup rho(t) <= C max(1/t, gamma_eff) * mass for all frames.

    gamma_eff is the largest drift slope scale max(-H') present; for the
    closed-form shell potential that equals gamma/4 * max(2r - 1/r) ~ gamma/4,
    and the caller normalizes.  Here the plain parabolic reference max(1/t, g)
    uses g = max drift / r-scale measured from the potential.
    """
    if traj.kind != "forward":
        raise ValueError("sup bound applies to forward density runs")
    mass = traj.conserved_mass(0)
    op = traj.op
    g_eff = float(np.max(np.abs(op.dh / op.dr)))  # max |H'| as slope scale
    fitted = 0.0
    worst = 0.0
    for t, s in zip(traj.diag_times[1:], traj.diag_sup[1:]):
        ref = max(1.0 / t, max(g_eff, 1e-300)) * mass
        c = s / ref
        if c > fitted:
            fitted, worst = c, float(t)
    return SupBoundReport(fitted_c=fitted, worst_time=worst)


@dataclass(frozen=True)
class TransportFrontReport:
    station_radius: float
    station_min: float
    level_radii: dict
    level_stability: dict
    best_level: float
    best_c_radius: float


def transport_front(
    f_traj: FPTrajectory,
    gamma: float,
    *,
    levels: tuple = (0.5, 0.4, 0.3, 0.25, 0.2, 0.1),
    station_radius: float = 5.0 / 7.0,
    t_window: tuple = (1.0, 50.0),
) -> TransportFrontReport:
    """Measure the spreading lower front of an adjoint run from plateau data.

    For each level c the front radius R(t) is the largest radius with
    f >= c; the report gives min over frames in the window of
    R(t)/sqrt(1 + gamma t) (the fitted front coefficient) and its max/min
    stability across the window, plus the minimum of f at the fixed station.
    """
    if f_traj.kind != "dual":
        raise ValueError("transport front is measured on adjoint runs")
    centers = f_traj.grid.centers
    station_series = np.array(
        [float(np.interp(station_radius, centers, fr)) for fr in f_traj.frames]
    )
    level_radii: dict[float, float] = {}
    level_stab: dict[float, float] = {}
    for lv in levels:
        ratios = []
        for t, fr in zip(f_traj.times, f_traj.frames):
            if not t_window[0] <= t <= t_window[1]:
                continue
            above = fr >= lv
            if not above[0]:
                ratios.append(0.0)
                continue
            j = int(np.argmin(above)) if not above.all() else centers.size
            if j >= centers.size:
                r_star = float(centers[-1])
            elif j == 0:
                r_star = 0.0
            else:
                f_hi, f_lo = fr[j - 1], fr[j]
                lam = (f_hi - lv) / max(f_hi - f_lo, 1e-300)
                r_star = float(centers[j - 1] + lam * (centers[j] - centers[j - 1]))
            ratios.append(r_star / math.sqrt(1.0 + gamma * t))
        if not ratios:
            raise ValueError("no frames inside the requested window")
        rmin, rmax = float(np.min(ratios)), float(np.max(ratios))
        level_radii[lv] = rmin
        level_stab[lv] = rmax / rmin if rmin > 0 else math.inf
    admissible = [lv for lv in levels if level_radii[lv] > 0 and math.isfinite(level_stab[lv])]
    best = min(admissible, key=lambda lv: level_stab[lv]) if admissible else float("nan")
    return TransportFrontReport(
        station_radius=station_radius,
        station_min=float(np.min(station_series)),
        level_radii=level_radii,
        level_stability=level_stab,
        best_level=best,
        best_c_radius=level_radii.get(best, 0.0),
    )


def threshold_decompose(
    g_prof: RadialProfile, pot, alpha: float
) -> tuple[RadialProfile, RadialProfile, np.ndarray]:
    """Split a signed profile at the moving threshold 2 alpha e^H.

    Returns (small part, large part, mask); the small part satisfies
    |G1| e^{-H} <= 2 alpha everywhere, and G1 + G2 = G exactly.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    h = _potential_values(pot, g_prof.grid)
    vals = g_prof.values
    with np.errstate(divide="ignore"):
        log_abs = np.where(vals != 0.0, np.log(np.abs(np.where(vals != 0.0, vals, 1.0))), -np.inf)
    mask = log_abs >= math.log(2.0 * alpha) + h
    g2 = np.where(mask, vals, 0.0)
    g1 = vals - g2
    return (
        RadialProfile(grid=g_prof.grid, values=g1, kind=g_prof.kind),
        RadialProfile(grid=g_prof.grid, values=g2, kind=g_prof.kind),
        mask,
    )


@dataclass(frozen=True)
class MassConcentrationReport:
    precondition_met: bool
    deviation_mass: float
    deviation_bound: float
    ball_mass: float
    ball_mass_floor: float
    tail_fraction: float

    @property
    def ok(self) -> bool:
        return self.precondition_met and self.deviation_mass <= self.deviation_bound and (
            self.ball_mass >= self.ball_mass_floor
        )


def mass_in_ball_from_Z(
    frame: RadialProfile,
    pot: AnnulusPotential,
    r: float,
    z_value: float,
    sigma: float,
    amplification: float,
    rho0_mass: float,
) -> MassConcentrationReport:
    """Concentration estimates inside the ball of radius r from a variance bound.

    Requires z_value <= amplification * (sigma floor) and r <= the plateau
    radius; converts the weighted variance into an L1 deviation bound on the
    ball and a mass floor there.  The stationary tail fraction outside the
    plateau is measured, not assumed.
    """
    if not 0.0 < r <= 1.0 / math.sqrt(2.0) + 1e-12:
        raise ValueError("ball radius must lie inside the plateau")
    grid = frame.grid
    gamma = pot.gamma
    z_floor = sigma * math.exp(-pot.plateau_value) * rho0_mass**2
    pre = z_value <= amplification * z_floor * (1.0 + 1e-12)
    rho_s = stationary_state(rho0_mass, pot, grid).values
    inside_plateau = grid.centers < 1.0 / math.sqrt(2.0)
    tail = float(
        np.sum(rho_s[~inside_plateau] * grid.volumes[~inside_plateau])
        / np.sum(rho_s * grid.volumes)
    )
    sel = grid.centers < r
    dev = float(np.sum(np.abs(frame.values - rho_s)[sel] * grid.volumes[sel]))
    dev_bound = math.sqrt(math.pi * sigma * amplification) * r * rho0_mass
    ball = float(np.sum(frame.values[sel] * grid.volumes[sel]))
    floor = (2.0 * r**2 * (1.0 - tail) - r * math.sqrt(math.pi * sigma * amplification)) * rho0_mass
    return MassConcentrationReport(
        precondition_met=bool(pre),
        deviation_mass=dev,
        deviation_bound=dev_bound,
        ball_mass=ball,
        ball_mass_floor=floor,
        tail_fraction=tail,
    )


def write_frames(traj: FPTrajectory, out_dir: str | Path, tag: str = "run") -> Path:
    """Dump frames as (t, r, value) CSV plus a JSON manifest; returns the dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{tag}_frames.csv"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "r", "value"])
        for t, fr in zip(traj.times, traj.frames):
            for r, v in zip(traj.grid.centers, fr):
                wr.writerow([f"{t:.12g}", f"{r:.12g}", f"{v:.12g}"])
    manifest = {
        "kind": traj.kind,
        "scheme": "exponential-fitting flux, implicit Euler",
        "dt_policy": {"dt_max": traj.dt_max, "cfl": traj.cfl},
        "grid": {
            "n_cells": traj.grid.n_cells,
            "r_max": traj.grid.r_max,
        },
        "potential_log_range": [float(np.min(traj.h_centers)), float(np.max(traj.h_centers))],
        "frames": len(traj.times),
    }
    with open(out / f"{tag}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return out
