"""Attraction potentials on radial grids and the steep weights they induce.

The central closed form is the potential generated by a unit annular shell
between radii 1/sqrt(2) and 1: flat inside, logarithmic outside, with the
transition region carrying all of the drift.  Its exponential is the steady
profile of the drift-diffusion flow and the weight for the spectral-gap
machinery; everything about it varies on scale 1/gamma, so evaluation stays
in log space throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import ProfileKind, RadialGrid, RadialProfile
from .numerics import log_weighted_sum

__all__ = [
    "AnnulusPotential",
    "WeightSpec",
    "ComparisonResult",
    "annulus_potential",
    "inverse_laplacian_radial",
    "radial_drift",
    "ground_state_weight",
    "power_law_weight",
    "uniform_weight",
    "concentration_compare",
]

R_INNER = 1.0 / math.sqrt(2.0)
R_PLATEAU_END = 0.75


@dataclass(frozen=True)
class AnnulusPotential:
    """Closed-form potential of the unit annular shell, scaled by gamma.

    Piecewise: constant (gamma/8)(1 - log 2) inside the shell's inner radius,
    (gamma/4)(log r + 1 - r^2) across the shell, -(gamma/4) log r outside.
    """

    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    def eval_H(self, r: np.ndarray | float) -> np.ndarray | float:
        r = np.asarray(r, dtype=float)
        q = self.gamma / 4.0
        inner = (self.gamma / 8.0) * (1.0 - math.log(2.0))
        with np.errstate(divide="ignore"):
            mid = q * (np.log(np.maximum(r, 1e-300)) + 1.0 - r**2)
            outer = -q * np.log(np.maximum(r, 1e-300))
        out = np.where(r < R_INNER, inner, np.where(r < 1.0, mid, outer))
        return float(out) if out.ndim == 0 else out

    def eval_dH(self, r: np.ndarray | float) -> np.ndarray | float:
        r = np.asarray(r, dtype=float)
        q = self.gamma / 4.0
        with np.errstate(divide="ignore"):
            rr = np.maximum(r, 1e-300)
            mid = q * (1.0 / rr - 2.0 * rr)
            outer = -q / rr
        out = np.where(r < R_INNER, 0.0, np.where(r < 1.0, mid, outer))
        return float(out) if out.ndim == 0 else out

    @property
    def plateau_value(self) -> float:
        return (self.gamma / 8.0) * (1.0 - math.log(2.0))

    # the potential doubles as the log of the steady-state weight
    def log_weight(self, r: np.ndarray | float) -> np.ndarray | float:
        return self.eval_H(r)


def annulus_potential(gamma: float) -> AnnulusPotential:
    return AnnulusPotential(gamma=gamma)


def _require_compact_support(g: RadialProfile) -> int:
    """Index one past the last nonzero cell; error if support touches the rim."""
    nz = np.nonzero(g.values)[0]
    if nz.size == 0:
        return 0
    if nz[-1] == g.grid.n_cells - 1:
        raise ValueError(
            "source must vanish on the outermost cell; enlarge r_max so the "
            "support is compactly contained in the grid"
        )
    return int(nz[-1]) + 1


def _prefix_moment(g: RadialProfile) -> np.ndarray:
    """P(edge_j) = integral_0^{edge_j} g(s) s ds, exact for cellwise-constant g."""
    cell = g.values * (g.grid.edges[1:] ** 2 - g.grid.edges[:-1] ** 2) / 2.0
    return np.concatenate(([0.0], np.cumsum(cell)))


def _log_moment_tail(g: RadialProfile) -> np.ndarray:
    """T(edge_j) = integral_{edge_j}^{inf} log(s) g(s) s ds, exact per cell.

    Uses the antiderivative s^2/2 log s - s^2/4 on each cell.
    """
    e = g.grid.edges
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(e > 0.0, 0.5 * e**2 * np.log(np.maximum(e, 1e-300)) - 0.25 * e**2, 0.0)
    cell = g.values * (anti[1:] - anti[:-1])
    return np.concatenate((np.cumsum(cell[::-1])[::-1], [0.0]))


def inverse_laplacian_radial(
    g: RadialProfile, chi: float = 1.0, at: np.ndarray | None = None
) -> RadialProfile | np.ndarray:
    """Potential H with -Lap H = chi*g in the plane, normalized to decay at infinity.

    H(r) = chi * [ -log(r) * P(r) - T(r) ] with P the prefix moment and T the
    tail log moment; both are exact for the cellwise-constant density, so the
    far field is exactly -(chi*||g||_1 / 2 pi) log r beyond the support.
    With `at` given, returns values at those radii instead of a profile.
    """
    if g.kind is not ProfileKind.DENSITY:
        raise ValueError("inverse_laplacian_radial expects a density profile")
    _require_compact_support(g)
    grid = g.grid
    P = _prefix_moment(g)
    T = _log_moment_tail(g)

    def eval_at(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(grid.edges, r, side="right") - 1, 0, grid.n_cells - 1)
        e_lo = grid.edges[idx]
        gi = g.values[idx]
        p = P[idx] + gi * (r**2 - e_lo**2) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.log(np.maximum(r, 1e-300))
            lg_lo = np.log(np.maximum(e_lo, 1e-300))
            anti_r = np.where(r > 0.0, 0.5 * r**2 * lg - 0.25 * r**2, 0.0)
            anti_lo = np.where(e_lo > 0.0, 0.5 * e_lo**2 * lg_lo - 0.25 * e_lo**2, 0.0)
        t = T[idx] - gi * (anti_r - anti_lo)
        h = -np.where(r > 0.0, lg, 0.0) * p - t
        return chi * h

    if at is not None:
        return eval_at(np.asarray(at, dtype=float))
    return RadialProfile(grid=grid, values=eval_at(grid.centers), kind=ProfileKind.POTENTIAL)


def radial_drift(
    g: RadialProfile, chi: float = 1.0, at: np.ndarray | None = None
) -> RadialProfile | np.ndarray:
    """d/dr of the induced potential: -(chi / r) * prefix moment, 0 at r = 0."""
    if g.kind is not ProfileKind.DENSITY:
        raise ValueError("radial_drift expects a density profile")
    grid = g.grid
    P = _prefix_moment(g)

    def eval_at(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(grid.edges, r, side="right") - 1, 0, grid.n_cells - 1)
        e_lo = grid.edges[idx]
        p = P[idx] + g.values[idx] * (r**2 - e_lo**2) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(r > 0.0, -chi * p / np.maximum(r, 1e-300), 0.0)
        return d

    if at is not None:
        return eval_at(np.asarray(at, dtype=float))
    return RadialProfile(grid=grid, values=eval_at(grid.centers), kind=ProfileKind.POTENTIAL)


@dataclass(frozen=True)
class WeightSpec:
    """A radial weight with the three structural decay conditions quantified.

    On [0, r1] the weight is flat up to a factor C0; on [r1, r2] the log-slope
    is at most -C1*gamma*(r - r1); on [r2, inf) it is at most -C2*gamma/r.
    C0, C1, C2 are the tightest constants found on a fine sample; they are
    measured outputs, not assumptions.
    """

    kind: str
    gamma: float
    r1: float
    r2: float
    log_weight: Callable[[np.ndarray], np.ndarray]
    dlog_weight: Callable[[np.ndarray], np.ndarray]
    C0: float
    C1: float
    C2: float

    def weight_at(self, r: np.ndarray) -> np.ndarray:
        """Direct weight values; prefer log_weight in integrals."""
        return np.exp(self.log_weight(np.asarray(r, dtype=float)))


def _measure_constants(
    log_w: Callable, dlog_w: Callable, gamma: float, r1: float, r2: float, r_far: float
) -> tuple[float, float, float]:
    s0 = np.linspace(0.0, r1, 2001)
    lw = np.asarray(log_w(s0), dtype=float)
    C0 = float(np.exp(np.max(lw) - np.min(lw)))

    s1 = np.linspace(r1, r2, 2001)[1:]
    ratio1 = -np.asarray(dlog_w(s1), dtype=float) / (gamma * (s1 - r1))
    C1 = float(np.min(ratio1))

    s2 = np.geomspace(r2, r_far, 4001)
    ratio2 = -np.asarray(dlog_w(s2), dtype=float) * s2 / gamma
    C2 = float(np.min(ratio2))

    if C1 <= 0 or C2 <= 0:
        raise ValueError(
            f"weight fails the decay conditions: C1={C1:.3g}, C2={C2:.3g}"
        )
    return C0, C1, C2


def ground_state_weight(gamma: float, r_far: float = 100.0) -> WeightSpec:
    """exp of the annular-shell potential, with plateau ends r1=1/sqrt(2), r2=3/4."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    pot = AnnulusPotential(gamma=gamma)
    C0, C1, C2 = _measure_constants(
        pot.eval_H, pot.eval_dH, gamma, R_INNER, R_PLATEAU_END, r_far
    )
    return WeightSpec(
        kind="ground_state",
        gamma=gamma,
        r1=R_INNER,
        r2=R_PLATEAU_END,
        log_weight=pot.eval_H,
        dlog_weight=pot.eval_dH,
        C0=C0,
        C1=C1,
        C2=C2,
    )


def power_law_weight(gamma: float, r_far: float = 100.0) -> WeightSpec:
    """(1 + r^2)^(-gamma/2): heavy-tailed weight with plateau radius 2/sqrt(gamma).

    The plateau factor C0 is at most e^2 for every gamma, since
    (1 + 4/gamma)^(gamma/2) increases to e^2.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    r1 = 2.0 / math.sqrt(gamma)
    r2 = 1.0
    if r1 >= r2:
        raise ValueError("power-law weight needs gamma > 4 so the plateau ends before r=1")

    def log_w(r):
        r = np.asarray(r, dtype=float)
        return -(gamma / 2.0) * np.log1p(r**2)

    def dlog_w(r):
        r = np.asarray(r, dtype=float)
        return -gamma * r / (1.0 + r**2)

    C0, C1, C2 = _measure_constants(log_w, dlog_w, gamma, r1, r2, r_far)
    return WeightSpec(
        kind="power",
        gamma=gamma,
        r1=r1,
        r2=r2,
        log_weight=log_w,
        dlog_weight=dlog_w,
        C0=C0,
        C1=C1,
        C2=C2,
    )


def uniform_weight(r1: float = 1.0, r2: float = 2.0) -> WeightSpec:
    """Flat test weight (w = 1).  Fixture for quadrature checks only: the decay
    conditions do not hold for it, so C1 and C2 are reported as 0."""

    def log_w(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    return WeightSpec(
        kind="uniform",
        gamma=1.0,
        r1=r1,
        r2=r2,
        log_weight=log_w,
        dlog_weight=log_w,
        C0=1.0,
        C1=0.0,
        C2=0.0,
    )


@dataclass(frozen=True)
class ComparisonResult:
    """Outcome of a concentration comparison between two radial densities."""

    more_concentrated: bool
    first_violation_radius: float | None
    drift_ordered: bool
    max_deficit: float


def concentration_compare(
    g1: RadialProfile, g2: RadialProfile, tol: float = 1e-12
) -> ComparisonResult:
    """Does g1 dominate g2 in prefix moments (mass in every ball)?

    Non-strict: equality counts as dominance.  When it holds, the induced
    inward drifts are ordered pointwise (stronger pull everywhere), which is
    re-checked directly and reported.
    """
    if g1.grid is not g2.grid and not np.array_equal(g1.grid.edges, g2.grid.edges):
        raise ValueError("concentration comparison requires a shared grid")
    P1 = _prefix_moment(g1)
    P2 = _prefix_moment(g2)
    scale = max(P1[-1], P2[-1], 1e-300)
    deficit = P2 - P1
    worst = float(np.max(deficit))
    ok = worst <= tol * scale
    first_violation = None
    if not ok:
        j = int(np.argmax(deficit > tol * scale))
        first_violation = float(g1.grid.edges[j])
    d1 = radial_drift(g1, at=g1.grid.edges[1:])
    d2 = radial_drift(g2, at=g1.grid.edges[1:])
    drift_ordered = bool(np.all(d1 <= d2 + tol * max(1.0, float(np.max(np.abs(d2)))))) and bool(
        np.all(d1 <= tol * scale)
    )
    return ComparisonResult(
        more_concentrated=ok,
        first_violation_radius=first_violation,
        drift_ordered=drift_ordered,
        max_deficit=worst / scale,
    )


def weighted_integral(values: np.ndarray, weight: WeightSpec | AnnulusPotential, grid: RadialGrid) -> float:
    """integral of values * w over the plane via cell sums in log space."""
    lw = np.asarray(weight.log_weight(grid.centers), dtype=float)
    return log_weighted_sum(np.asarray(values, dtype=float), lw, grid.volumes)
