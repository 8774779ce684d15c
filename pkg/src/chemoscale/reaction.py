"""Coupled attraction-reaction dynamics and its diffusion-only baselines.

Two radial fields evolve together: a mobile population that diffuses and
drifts toward the potential induced by a static-in-space target field, and
the target itself, which is consumed at a rate proportional to the local
product of the two.  The induced potential is refreshed from the current
target once per macro step; within a step the motion and the consumption are
composed by Strang splitting.

The consumption substep is integrated in closed form.  Pointwise the pair
(rho1, rho2) loses the same amount from each side, so their difference is
locally conserved and the substep reduces to a scalar logistic flow.  Using
the exact flow removes the reaction stiffness entirely and makes the two
loss budgets agree to roundoff regardless of the step size; it also yields
the per-cell time integral of rho1 exactly, via the log of the target ratio.

Half-times are measured against the threshold pi*theta*fraction on the
dense per-step mass series.  The outer wall is reflecting; place it far
enough out that reflection cannot reach the region of interest within the
horizon.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import ive

from .fokker_planck import (
    NEGATIVITY_TOL,
    TransportOperator,
    fp_solve,
    _normalize_frame_times,
)
from .grid import ProfileKind, RadialGrid, RadialProfile
from .numerics import gauss_panels
from .potential import annulus_potential, inverse_laplacian_radial

__all__ = [
    "Params",
    "CoupledState",
    "CoupledTrajectory",
    "OracleTrajectory",
    "HalfTimeReport",
    "MassComparisonReport",
    "PassThroughReport",
    "initial_shell",
    "initial_target",
    "coupled_solve",
    "diffusion_baseline_solve",
    "subsolution_oracle",
    "half_time",
    "exp_integral_e1",
    "tau_d_lower_bound",
    "verify_mass_comparison",
    "verify_pass_through",
    "save_trajectory",
    "load_trajectory",
]

# relative slack for the structural identity "mass lost by rho1 equals mass
# lost by rho2"; a breach means a scheme bug, so runs abort on it
BUDGET_TOL = 1e-6


@dataclass(frozen=True)
class Params:
    """Normalized model parameters (unit diffusivity).

    chi scales the attraction toward the target's induced potential, eps the
    consumption rate, theta the target amplitude, M0 the mobile mass, L the
    initial separation.  gamma = chi * theta is the single steepness number
    the whole analysis runs on.  Raw (dimensional) parameters enter through
    `from_raw`, which applies the normalizing space-time rescaling.
    """

    chi: float
    eps: float
    theta: float
    M0: float
    L: float
    regime_floor: float = 100.0

    def __post_init__(self):
        # chi and eps may be zero for the degenerate diagnostics (baseline
        # pipeline, frozen-target decoupling); the rest must be positive
        if self.chi < 0:
            raise ValueError("chi must be nonnegative")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        for name in ("theta", "M0", "L"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.regime_floor <= 0:
            raise ValueError("regime_floor must be positive")

    @property
    def gamma(self) -> float:
        return self.chi * self.theta

    def regime_flags(self) -> dict[str, bool]:
        """Which of the three largeness thresholds hold at the configured floor."""
        b = self.regime_floor
        g = self.gamma
        return {
            "mass_reaction": g > 0 and self.M0 * self.eps / g >= b,
            "steepness": g >= b,
            "mass_ratio": self.M0 / self.theta >= b,
        }

    @property
    def in_regime(self) -> bool:
        return all(self.regime_flags().values())

    @staticmethod
    def from_raw(
        chi: float,
        eps: float,
        theta: float,
        M0: float,
        L: float,
        *,
        kappa: float,
        R: float,
        regime_floor: float = 100.0,
    ) -> "Params":
        """Normalize dimensional parameters: x -> x/R, t -> t*kappa/R^2."""
        if kappa <= 0 or R <= 0:
            raise ValueError("kappa and R must be positive")
        s = R * R / kappa
        return Params(
            chi=chi * s,
            eps=eps * s,
            theta=theta,
            M0=M0 / (R * R),
            L=L / R,
            regime_floor=regime_floor,
        )


# --- initial data ------------------------------------------------------------


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity ramp: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        b = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return a / (a + b)


def initial_shell(grid: RadialGrid, L: float, M0: float, *, width: float = 1.0) -> RadialProfile:
    """Smooth annular shell centered at radius L with exact on-grid mass M0.

    The support is [L - width/2, L + width/2]; it must sit inside
    {r >= L/2} (the separation hypothesis) and inside the grid.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    if L - width / 2.0 < L / 2.0:
        raise ValueError("shell must stay supported in r >= L/2; reduce width")
    if L + width / 2.0 >= grid.r_max:
        raise ValueError("shell support exceeds the grid; enlarge r_max")
    s = (grid.centers - L) / (width / 2.0)
    vals = np.zeros(grid.n_cells)
    inside = np.abs(s) < 1.0
    vals[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    raw_mass = float(np.dot(vals, grid.volumes))
    if raw_mass <= 0:
        raise ValueError("grid too coarse to resolve the shell; refine near r = L")
    return RadialProfile(grid=grid, values=vals * (M0 / raw_mass), kind=ProfileKind.DENSITY)


def initial_target(grid: RadialGrid, theta: float, *, taper: float = 1.0 / 64.0) -> RadialProfile:
    """theta times a smooth indicator of the unit disk, tapered outward.

    The profile equals theta on r <= 1 and falls to zero over [1, 1 + taper],
    so it dominates theta * (indicator of the unit disk) pointwise.
    """
    if taper <= 0:
        raise ValueError("taper must be positive")
    if 1.0 + taper >= grid.r_max:
        raise ValueError("target taper exceeds the grid")
    n_taper = int(np.sum((grid.edges > 1.0) & (grid.edges < 1.0 + taper)))
    if n_taper < 1:
        raise ValueError(
            "grid too coarse to resolve the target taper; refine near r = 1 "
            "or widen the taper"
        )
    vals = theta * (1.0 - _smoothstep((grid.centers - 1.0) / taper))
    vals[grid.centers >= 1.0 + taper] = 0.0
    return RadialProfile(grid=grid, values=vals, kind=ProfileKind.DENSITY)


# --- the exact pairwise consumption flow -------------------------------------


def _expm1_over_x(x: np.ndarray) -> np.ndarray:
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = np.expm1(x[nz]) / x[nz]
    return out


def _react_exact(a: np.ndarray, b: np.ndarray, eps: float, dt: float):
    """Advance d/dt rho1 = d/dt rho2 = -eps*rho1*rho2 exactly over dt.

    Returns the new pair and the per-cell integral of rho1 over the substep.
    Both updates use the logistic closed form written against the conserved
    pointwise difference; each output is manifestly in [0, initial value].
    """
    if eps == 0.0:
        return a.copy(), b.copy(), a * dt
    x = eps * dt * (a - b)
    b_new = b / (1.0 + a * eps * dt * _expm1_over_x(x))
    a_new = a / (1.0 + b * eps * dt * _expm1_over_x(-x))
    integral = np.log1p(a * eps * dt * _expm1_over_x(x)) / eps
    return a_new, b_new, integral


# --- trajectories ------------------------------------------------------------


@dataclass(frozen=True)
class CoupledState:
    """One saved instant of the coupled pair."""

    t: float
    rho1: RadialProfile
    rho2: RadialProfile
    cum_rho1: np.ndarray
    mass1: float
    mass2: float


@dataclass(frozen=True)
class CoupledTrajectory:
    grid: RadialGrid
    params: Params
    mode: str                       # "chemotaxis" | "diffusion-only"
    times: np.ndarray               # frame times
    rho1: np.ndarray                # (n_frames, n_cells)
    rho2: np.ndarray
    cum_rho1: np.ndarray
    diag_times: np.ndarray          # dense per-step series
    diag_mass1: np.ndarray
    diag_mass2: np.ndarray
    dt_max: float
    cfl: float
    twin_rho1: np.ndarray | None = None     # consumption-free replay, same drift

    @property
    def n_frames(self) -> int:
        return int(self.times.size)

    def state(self, i: int) -> CoupledState:
        return CoupledState(
            t=float(self.times[i]),
            rho1=RadialProfile(grid=self.grid, values=self.rho1[i], kind=ProfileKind.DENSITY),
            rho2=RadialProfile(grid=self.grid, values=self.rho2[i], kind=ProfileKind.DENSITY),
            cum_rho1=self.cum_rho1[i],
            mass1=float(np.dot(self.rho1[i], self.grid.volumes)),
            mass2=float(np.dot(self.rho2[i], self.grid.volumes)),
        )

    def _interp(self, stack: np.ndarray, t: float) -> np.ndarray:
        times = self.times
        if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
            raise ValueError(f"time {t} outside saved range [{times[0]}, {times[-1]}]")
        j = int(np.clip(np.searchsorted(times, t) - 1, 0, times.size - 2))
        t0, t1 = times[j], times[j + 1]
        lam = 0.0 if t1 == t0 else min(max((t - t0) / (t1 - t0), 0.0), 1.0)
        return (1.0 - lam) * stack[j] + lam * stack[j + 1]

    def rho1_at(self, t: float) -> np.ndarray:
        return self._interp(self.rho1, t)

    def rho2_at(self, t: float) -> np.ndarray:
        return self._interp(self.rho2, t)

    def cum_rho1_at(self, t: float) -> np.ndarray:
        return self._interp(self.cum_rho1, t)


@dataclass(frozen=True)
class OracleTrajectory:
    """Heat-flow upper envelope g1 and the induced lower envelope g2."""

    grid: RadialGrid
    params: Params
    mode: str                       # "subsolution-oracle"
    times: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    diag_times: np.ndarray
    diag_mass1: np.ndarray
    diag_mass2: np.ndarray


def _solve_split(
    params: Params,
    rho1_0: RadialProfile,
    rho2_0: RadialProfile,
    T: float,
    dt_max: float,
    cfl: float,
    frame_times,
    cum0: np.ndarray | None,
    track_twin: bool = False,
) -> CoupledTrajectory:
    grid = rho1_0.grid
    if rho2_0.grid is not grid and not np.array_equal(rho2_0.grid.edges, grid.edges):
        raise ValueError("both fields must live on the same grid")
    for p in (rho1_0, rho2_0):
        if p.kind is not ProfileKind.DENSITY:
            raise ValueError("initial conditions must be density profiles")
        if float(np.min(p.values)) < 0:
            raise ValueError("initial conditions must be nonnegative")
    if T <= 0:
        raise ValueError("horizon must be positive")

    v = grid.volumes
    rho1 = rho1_0.values.copy()
    rho2 = rho2_0.values.copy()
    cum = np.zeros_like(rho1) if cum0 is None else np.asarray(cum0, dtype=float).copy()
    mass1_0 = float(np.dot(rho1, v))
    mass2_0 = float(np.dot(rho2, v))
    budget_scale = max(mass2_0, 1e-12 * max(mass1_0, 1.0))

    chi = params.chi
    static = chi == 0.0
    op = TransportOperator(grid, np.zeros(grid.n_cells)) if static else None

    ft = _normalize_frame_times(frame_times, T)
    frames1, frames2, framesc = [rho1.copy()], [rho2.copy()], [cum.copy()]
    diag_t, diag_m1, diag_m2 = [0.0], [mass1_0], [mass2_0]
    twin = rho1.copy() if track_twin else None
    frames_twin = [rho1.copy()] if track_twin else None

    t = 0.0
    k = 1
    min_rho1 = 0.0
    while t < T - 1e-12 * max(T, 1.0):
        if not static:
            prof2 = RadialProfile(grid=grid, values=rho2, kind=ProfileKind.DENSITY)
            h = inverse_laplacian_radial(prof2, chi=chi, at=grid.centers)
            op = TransportOperator(grid, h)
        dt_policy = min(dt_max, cfl * op.cfl_dt())
        if dt_policy < 1e-13 * max(T, 1.0):
            raise ValueError(
                f"stable step {dt_policy:.3e} underflows the horizon; the induced "
                "potential is too stiff for this grid"
            )
        stop = ft[k] if k < ft.size else T
        dt = min(dt_policy, stop - t)

        if params.eps == 0.0:
            # no consumption: collapse the sandwich to one full step so the
            # run reproduces the fixed-potential solver exactly
            before = rho1
            rho1 = op.implicit_step(rho1, dt)
            cum = cum + 0.5 * dt * (before + rho1)
            if twin is not None:
                twin = op.implicit_step(twin, dt)
        else:
            rho1 = op.implicit_step(rho1, 0.5 * dt)
            rho1, rho2, gained = _react_exact(rho1, rho2, params.eps, dt)
            cum = cum + gained
            rho1 = op.implicit_step(rho1, 0.5 * dt)
            if twin is not None:
                twin = op.implicit_step(op.implicit_step(twin, 0.5 * dt), 0.5 * dt)

        t += dt
        m1 = float(np.dot(rho1, v))
        m2 = float(np.dot(rho2, v))
        diag_t.append(t)
        diag_m1.append(m1)
        diag_m2.append(m2)
        min_rho1 = min(min_rho1, float(np.min(rho1)))

        if t >= stop - 1e-12 * max(T, 1.0):
            drop1 = mass1_0 - m1
            drop2 = mass2_0 - m2
            if abs(drop1 - drop2) > BUDGET_TOL * max(budget_scale, abs(drop1), abs(drop2)):
                raise AssertionError(
                    f"mass budget identity violated at t={t:.6g}: rho1 lost "
                    f"{drop1:.6e}, rho2 lost {drop2:.6e}; scheme error"
                )
            frames1.append(rho1.copy())
            frames2.append(rho2.copy())
            framesc.append(cum.copy())
            if frames_twin is not None:
                frames_twin.append(twin.copy())
            k += 1

    top = max(float(np.max(frames1[0])), 1e-300)
    if min_rho1 < -NEGATIVITY_TOL * top:
        raise AssertionError("negative density beyond tolerance; scheme bug")

    return CoupledTrajectory(
        grid=grid,
        params=params,
        mode="chemotaxis" if chi > 0 else "diffusion-only",
        times=ft,
        rho1=np.array(frames1),
        rho2=np.array(frames2),
        cum_rho1=np.array(framesc),
        diag_times=np.array(diag_t),
        diag_mass1=np.array(diag_m1),
        diag_mass2=np.array(diag_m2),
        dt_max=dt_max,
        cfl=cfl,
        twin_rho1=np.array(frames_twin) if frames_twin is not None else None,
    )


def coupled_solve(
    params: Params,
    rho1_0: RadialProfile,
    rho2_0: RadialProfile,
    T: float,
    *,
    dt_max: float = 0.05,
    cfl: float = 1.0,
    frame_times=None,
    cum0: np.ndarray | None = None,
    track_twin: bool = False,
) -> CoupledTrajectory:
    """Run the coupled pair to time T.

    Per macro step: refresh the induced potential from the current target,
    half-step of transport, exact consumption flow over the full step, second
    half-step of transport.  cum0 seeds the accumulated rho1 integral when
    resuming a saved run.  With track_twin the consumption-free twin is
    advanced through the identical drift history and saved alongside; the
    discrete comparison principle keeps it pointwise above rho1.
    """
    return _solve_split(
        params, rho1_0, rho2_0, T, dt_max, cfl, frame_times, cum0, track_twin
    )


def diffusion_baseline_solve(
    params: Params,
    rho1_0: RadialProfile,
    rho2_0: RadialProfile,
    T: float,
    *,
    dt_max: float = 0.05,
    cfl: float = 1.0,
    frame_times=None,
) -> CoupledTrajectory:
    """Same pipeline with the attraction switched off."""
    return _solve_split(
        replace(params, chi=0.0), rho1_0, rho2_0, T, dt_max, cfl, frame_times, None, False
    )


# --- closed-form heat-flow oracle --------------------------------------------


def _heat_apply(grid: RadialGrid, source_cells: np.ndarray, t: float, order: int = 4) -> np.ndarray:
    """Evaluate exp(t*Laplacian) applied to a cellwise-constant radial density.

    Uses the radial heat kernel with the scaled Bessel function, integrated
    over source cells by composite Gauss panels; exact in time, spectrally
    accurate in the source integral for t not far below the cell width
    squared.
    """
    if t <= 0:
        return source_cells.copy()
    nodes, wts = gauss_panels(grid.edges, order=order)
    per_node = np.repeat(source_cells, order)
    r = grid.centers[:, None]
    s = nodes[None, :]
    kern = (0.5 / t) * np.exp(-((r - s) ** 2) / (4.0 * t)) * ive(0, r * s / (2.0 * t))
    return kern @ (per_node * nodes * wts)


def subsolution_oracle(
    params: Params,
    rho1_0: RadialProfile,
    rho2_0: RadialProfile,
    T: float,
    *,
    n_times: int = 65,
) -> OracleTrajectory:
    """Pure heat flow for the mobile field, exact exponential decay for the target.

    The heat solution dominates the reacting mobile field, so the induced
    target envelope is a true lower bound for the diffusion-only run.  The
    time integral feeding the exponential uses the trapezoid rule on the
    returned time mesh; refine n_times if that resolution matters.
    """
    if T <= 0:
        raise ValueError("horizon must be positive")
    if n_times < 2:
        raise ValueError("n_times must be at least 2")
    grid = rho1_0.grid
    inner = grid.centers < params.L / 2.0
    if float(np.dot(rho1_0.values * inner, grid.volumes)) > 1e-12 * params.M0:
        warnings.warn(
            "initial mobile mass inside r < L/2; the separation hypothesis "
            "behind the lower bound does not hold there",
            stacklevel=2,
        )
    times = np.linspace(0.0, T, n_times)
    g1 = np.empty((n_times, grid.n_cells))
    g1[0] = rho1_0.values
    for i, t in enumerate(times[1:], start=1):
        g1[i] = _heat_apply(grid, rho1_0.values, float(t))
    cum = np.zeros_like(g1)
    dt = np.diff(times)
    cum[1:] = np.cumsum(0.5 * dt[:, None] * (g1[:-1] + g1[1:]), axis=0)
    g2 = rho2_0.values[None, :] * np.exp(-params.eps * cum)
    v = grid.volumes
    return OracleTrajectory(
        grid=grid,
        params=params,
        mode="subsolution-oracle",
        times=times,
        g1=g1,
        g2=g2,
        diag_times=times,
        diag_mass1=g1 @ v,
        diag_mass2=g2 @ v,
    )


# --- half-times --------------------------------------------------------------


@dataclass(frozen=True)
class HalfTimeReport:
    tau: float                      # inf when the threshold was not reached
    threshold_fraction: float
    params: Params
    mode: str
    reached: bool
    t_end: float

    def __post_init__(self):
        # tau == 0 is legal only for the degenerate zero-fraction query
        if self.reached and self.tau < 0:
            raise ValueError("a reached half-time cannot be negative")
        if self.reached and self.tau == 0.0 and self.threshold_fraction > 0:
            raise ValueError("a reached half-time must be positive")


def half_time(traj, fraction: float = 0.5) -> HalfTimeReport:
    """First time the target mass has dropped by fraction * pi * theta.

    Works on coupled, baseline, and oracle trajectories; crossings are
    located by linear interpolation on the dense mass series.
    """
    if not 0.0 <= fraction:
        raise ValueError("fraction must be nonnegative")
    params: Params = traj.params
    times = np.asarray(traj.diag_times, dtype=float)
    mass2 = np.asarray(traj.diag_mass2, dtype=float)
    threshold = fraction * math.pi * params.theta
    drop = mass2[0] - mass2
    if fraction == 0.0:
        return HalfTimeReport(
            tau=0.0, threshold_fraction=0.0, params=params, mode=traj.mode,
            reached=True, t_end=float(times[-1]),
        )
    hit = np.nonzero(drop >= threshold)[0]
    if hit.size == 0:
        return HalfTimeReport(
            tau=math.inf, threshold_fraction=fraction, params=params,
            mode=traj.mode, reached=False, t_end=float(times[-1]),
        )
    j = int(hit[0])
    if j == 0:
        tau = float(times[0])
    else:
        d0, d1 = drop[j - 1], drop[j]
        lam = 0.0 if d1 == d0 else (threshold - d0) / (d1 - d0)
        tau = float(times[j - 1] + lam * (times[j] - times[j - 1]))
    return HalfTimeReport(
        tau=max(tau, np.finfo(float).tiny),
        threshold_fraction=fraction,
        params=params,
        mode=traj.mode,
        reached=True,
        t_end=float(times[-1]),
    )


# --- the baseline half-time prediction ---------------------------------------


@lru_cache(maxsize=4)
def _laguerre_rule(n: int):
    nodes, weights = np.polynomial.laguerre.laggauss(n)
    return nodes, weights


@lru_cache(maxsize=2)
def _gl_rule(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def exp_integral_e1(x: float) -> float:
    """E1(x) = integral of exp(-t)/t from x to infinity, by fixed quadrature.

    Gauss-Laguerre after shifting for x >= 1; for smaller x the head
    integral is computed on a log axis, where the integrand is entire, and
    added to the tail from 1.
    """
    if not x > 0:
        raise ValueError("the exponential integral needs a positive argument")
    if x >= 1.0:
        v, w = _laguerre_rule(80)
        return math.exp(-x) * float(np.sum(w / (x + v)))
    lo = math.log(x)
    n_panels = max(1, int(math.ceil(-lo / 2.0)))
    cuts = np.linspace(lo, 0.0, n_panels + 1)
    gn, gw = _gl_rule(16)
    mid = 0.5 * (cuts[:-1] + cuts[1:])
    half = 0.5 * np.diff(cuts)
    y = mid[:, None] + half[:, None] * gn[None, :]
    head = float(np.sum(np.exp(-np.exp(y)) * gw[None, :] * half[:, None]))
    return head + exp_integral_e1(1.0)


def tau_d_lower_bound(params: Params, *, constant: float = 0.25, tol: float = 1e-12) -> float:
    """Baseline half-time floor: invert E1(constant * L^2 / tau) = 4*pi*log2/(M0*eps).

    Monotone bisection on the log of the E1 argument.  `constant` is the
    free comparison constant in the heat-kernel envelope; 1/4 is the bare
    kernel exponent, and sweeps may refit it.
    """
    if constant <= 0:
        raise ValueError("constant must be positive")
    rhs = 4.0 * math.pi * math.log(2.0) / (params.M0 * params.eps)
    x_lo, x_hi = 1e-290, 745.0
    if not exp_integral_e1(x_hi) < rhs < exp_integral_e1(x_lo):
        raise ValueError(
            "parameters outside the invertible range of the half-time floor "
            f"(target {rhs:.3e}); the reaction budget M0*eps is too extreme"
        )
    u_lo, u_hi = math.log(x_lo), math.log(x_hi)
    for _ in range(200):
        u = 0.5 * (u_lo + u_hi)
        if exp_integral_e1(math.exp(u)) > rhs:
            u_lo = u
        else:
            u_hi = u
        if u_hi - u_lo < tol:
            break
    x = math.exp(0.5 * (u_lo + u_hi))
    return constant * params.L**2 / x


# --- verification reports ----------------------------------------------------


@dataclass(frozen=True)
class MassComparisonReport:
    tau_c: float
    n_frames_checked: int
    n_violations: int
    worst_margin: float             # most negative slack seen (>= -tol passes)
    tolerance: float
    ok: bool


def verify_mass_comparison(
    coupled_traj: CoupledTrajectory, params: Params, *, tol: float | None = None
) -> MassComparisonReport:
    """Ball-mass domination against the frozen worst-case potential.

    Reruns the same initial mobile field under the static annular-shell
    potential at the same steepness, then checks at every saved frame up to
    the measured half-time and at every grid edge that the coupled run keeps
    at least the frozen run's ball mass minus half the initial target mass.
    """
    if tol is None:
        tol = 1e-6 * params.M0
    v = coupled_traj.grid.volumes
    mass2_0 = float(np.dot(coupled_traj.rho2[0], v))
    ht = half_time(coupled_traj)
    tau_c = ht.tau if ht.reached else float(coupled_traj.times[-1])
    sel = coupled_traj.times <= tau_c + 1e-12
    check_times = coupled_traj.times[sel]
    if check_times.size == 0 or check_times[-1] <= 0:
        raise ValueError("no saved frames at or before the half-time")

    rho1_0 = RadialProfile(
        grid=coupled_traj.grid, values=coupled_traj.rho1[0], kind=ProfileKind.DENSITY
    )
    frozen = fp_solve(
        rho1_0,
        annulus_potential(params.gamma),
        float(check_times[-1]),
        dt_max=coupled_traj.dt_max,
        cfl=coupled_traj.cfl,
        frame_times=check_times[check_times > 0],
    )
    worst = math.inf
    bad = 0
    checked = 0
    for t in check_times:
        ball_coupled = np.cumsum(coupled_traj.rho1_at(float(t)) * v)
        ball_frozen = np.cumsum(frozen.at_time(float(t)) * v)
        slack = ball_coupled - (ball_frozen - 0.5 * mass2_0)
        worst = min(worst, float(np.min(slack)))
        bad += int(np.sum(slack < -tol))
        checked += 1
    return MassComparisonReport(
        tau_c=tau_c,
        n_frames_checked=checked,
        n_violations=bad,
        worst_margin=worst,
        tolerance=tol,
        ok=bad == 0,
    )


@dataclass(frozen=True)
class PassThroughReport:
    fitted_c: float                 # gamma/M0 * min accumulated rho1 on (1/2, 1)
    fitted_c_windowed: float        # same for sliding-window averages, width 1/gamma
    t_end: float
    from_measured_tau: bool
    rho2_ratio_max: float           # max over (1/2,1) of rho2(t_end)/rho2(0)


def verify_pass_through(
    coupled_traj: CoupledTrajectory, params: Params, t_end: float | None = None
) -> PassThroughReport:
    """How much mobile mass has crossed the transition annulus, normalized.

    The pointwise figure uses the accumulated per-cell integral of rho1; the
    windowed figure averages its area-weighted radial profile over sliding
    intervals of width 1/gamma inside (1/2, 1), which is the form that is
    robust to thin gaps.
    """
    from_measured = t_end is None
    if t_end is None:
        ht = half_time(coupled_traj)
        if not ht.reached:
            raise ValueError(
                "trajectory never reached its half-time; pass t_end explicitly"
            )
        t_end = ht.tau + 1.0
    if t_end > coupled_traj.times[-1] + 1e-12:
        raise ValueError(
            f"trajectory too short: need frames through t={t_end:.6g}, have "
            f"{coupled_traj.times[-1]:.6g}"
        )
    if params.gamma <= 0:
        raise ValueError("pass-through normalization needs gamma > 0")
    grid = coupled_traj.grid
    cum = coupled_traj.cum_rho1_at(float(t_end))
    mask = (grid.centers > 0.5) & (grid.centers < 1.0)
    if not np.any(mask):
        raise ValueError("grid has no cells inside the transition annulus")
    fitted_c = params.gamma / params.M0 * float(np.min(cum[mask]))

    width = 1.0 / params.gamma
    lo_edges = grid.edges[(grid.edges >= 0.5) & (grid.edges + width <= 1.0)]
    if lo_edges.size == 0:
        lo_edges = np.array([0.5])
    prefix = np.concatenate(([0.0], np.cumsum(cum * grid.volumes)))

    def prefix_at(r: float) -> float:
        j = grid.cell_of(min(r, grid.r_max))
        e_lo = grid.edges[j]
        partial = cum[j] * math.pi * (r * r - e_lo * e_lo)
        return float(prefix[j] + partial)

    window_avgs = [
        (prefix_at(float(a) + width) - prefix_at(float(a))) / width for a in lo_edges
    ]
    fitted_win = params.gamma / params.M0 * float(np.min(window_avgs))

    rho2_end = coupled_traj.rho2_at(float(t_end))
    base = coupled_traj.rho2[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(base > 0, rho2_end / np.maximum(base, 1e-300), 0.0)
    return PassThroughReport(
        fitted_c=fitted_c,
        fitted_c_windowed=fitted_win,
        t_end=float(t_end),
        from_measured_tau=from_measured,
        rho2_ratio_max=float(np.max(ratio[mask])),
    )


# --- trajectory store --------------------------------------------------------


def save_trajectory(traj: CoupledTrajectory, out_dir: str | Path) -> Path:
    """Directory layout: manifest.json, grid_edges.csv, diag.csv, frames/*.csv."""
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "grid_edges.csv", traj.grid.edges, header="edge", comments="")
    with open(out / "diag.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "mass1", "mass2"])
        for row in zip(traj.diag_times, traj.diag_mass1, traj.diag_mass2):
            wr.writerow([f"{row[0]:.17g}", f"{row[1]:.17g}", f"{row[2]:.17g}"])
    frame_entries = []
    for i, t in enumerate(traj.times):
        name = f"frames/frame_{i:04d}.csv"
        with open(out / name, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "rho1", "rho2", "cum_rho1"])
            for j in range(traj.grid.n_cells):
                wr.writerow(
                    [
                        f"{traj.grid.centers[j]:.12g}",
                        f"{traj.rho1[i, j]:.17g}",
                        f"{traj.rho2[i, j]:.17g}",
                        f"{traj.cum_rho1[i, j]:.17g}",
                    ]
                )
        frame_entries.append({"t": float(t), "file": name})
    p = traj.params
    manifest = {
        "format": "coupled-trajectory-v1",
        "mode": traj.mode,
        "params": {
            "chi": p.chi, "eps": p.eps, "theta": p.theta,
            "M0": p.M0, "L": p.L, "regime_floor": p.regime_floor,
        },
        "scheme": {
            "splitting": "strang-exact-consumption",
            "dt_max": traj.dt_max,
            "cfl": traj.cfl,
        },
        "grid": {"n_cells": traj.grid.n_cells, "r_max": traj.grid.r_max},
        "frames": frame_entries,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return out


def load_trajectory(in_dir: str | Path) -> CoupledTrajectory:
    src = Path(in_dir)
    with open(src / "manifest.json") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "coupled-trajectory-v1":
        raise ValueError(f"unrecognized trajectory format {manifest.get('format')!r}")
    edges = np.loadtxt(src / "grid_edges.csv", skiprows=1)
    grid = RadialGrid(edges=edges)
    params = Params(**manifest["params"])
    diag = np.loadtxt(src / "diag.csv", delimiter=",", skiprows=1)
    diag = np.atleast_2d(diag)
    times, r1s, r2s, cums = [], [], [], []
    for entry in manifest["frames"]:
        data = np.loadtxt(src / entry["file"], delimiter=",", skiprows=1)
        times.append(entry["t"])
        r1s.append(data[:, 1])
        r2s.append(data[:, 2])
        cums.append(data[:, 3])
    return CoupledTrajectory(
        grid=grid,
        params=params,
        mode=manifest["mode"],
        times=np.asarray(times),
        rho1=np.array(r1s),
        rho2=np.array(r2s),
        cum_rho1=np.array(cums),
        diag_times=diag[:, 0],
        diag_mass1=diag[:, 1],
        diag_mass2=diag[:, 2],
        dt_max=float(manifest["scheme"]["dt_max"]),
        cfl=float(manifest["scheme"]["cfl"]),
    )
