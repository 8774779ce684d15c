"""Radial finite-volume grids and profiles on the plane.

Cells are annuli; a cell value lives at the annulus midpoint radius and the
cell measure is the exact annulus area pi*(r_{i+1}^2 - r_i^2).  Cumulative
mass functions live on cell edges so that prefix sums are exact.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProfileKind",
    "RadialGrid",
    "RadialProfile",
    "build_graded_grid",
    "integrate",
    "to_mass_function",
    "from_mass_function",
    "profile_from_function",
]

# these radii must be exact grid edges: the steep-weight machinery switches
# behaviour there and indicator data snapped to them stays exact
STRUCTURAL_EDGES = (0.5, 1.0 / math.sqrt(2.0), 0.75, 1.0)


class ProfileKind(enum.Enum):
    DENSITY = "density"
    MASS_FUNCTION = "mass_function"
    POTENTIAL = "potential"


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing edges from 0; centers and areas are derived."""

    edges: np.ndarray
    centers: np.ndarray = field(init=False)
    volumes: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("edges must be a 1-D array with at least two entries")
        if edges[0] != 0.0:
            raise ValueError("first edge must be exactly 0")
        if not np.all(np.diff(edges) > 0):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "centers", 0.5 * (edges[:-1] + edges[1:]))
        object.__setattr__(self, "volumes", math.pi * (edges[1:] ** 2 - edges[:-1] ** 2))

    @property
    def n_cells(self) -> int:
        return self.centers.size

    @property
    def r_max(self) -> float:
        return float(self.edges[-1])

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.edges)

    def cell_of(self, r: float) -> int:
        """Index of the cell containing radius r (edges resolve rightward)."""
        if not 0.0 <= r <= self.r_max:
            raise ValueError(f"radius {r} outside grid [0, {self.r_max}]")
        i = int(np.searchsorted(self.edges, r, side="right")) - 1
        return min(i, self.n_cells - 1)

    def edge_index(self, r: float, tol: float = 1e-12) -> int:
        """Index of the edge equal to r; raises if r is not an edge."""
        i = int(np.argmin(np.abs(self.edges - r)))
        if abs(self.edges[i] - r) > tol * max(1.0, abs(r)):
            raise ValueError(f"radius {r} is not a grid edge")
        return i


@dataclass(frozen=True)
class RadialProfile:
    """Values on a radial grid; densities/potentials per cell, mass per edge."""

    grid: RadialGrid
    values: np.ndarray
    kind: ProfileKind

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = self.grid.edges.size if self.kind is ProfileKind.MASS_FUNCTION else self.grid.n_cells
        if values.shape != (expected,):
            raise ValueError(
                f"{self.kind.value} profile needs {expected} values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        if self.kind is ProfileKind.MASS_FUNCTION:
            if abs(values[0]) > 1e-12 * max(1.0, abs(values[-1])):
                raise ValueError("mass function must start at 0")
            drops = np.diff(values)
            if np.any(drops < -1e-10 * max(1.0, float(np.max(np.abs(values))))):
                raise ValueError("mass function must be nondecreasing")
        object.__setattr__(self, "values", values)

    @property
    def radii(self) -> np.ndarray:
        if self.kind is ProfileKind.MASS_FUNCTION:
            return self.grid.edges
        return self.grid.centers

    def interp(self, r: np.ndarray | float) -> np.ndarray | float:
        """Linear interpolation in radius (constant extrapolation)."""
        return np.interp(r, self.radii, self.values)


def _refine(a: float, b: float, h_target: float) -> np.ndarray:
    """Uniform subdivision of [a, b] with spacing <= h_target, endpoints exact."""
    n = max(1, int(math.ceil((b - a) / h_target - 1e-12)))
    pts = a + (b - a) * np.arange(1, n + 1) / n
    pts[-1] = b
    return pts


def build_graded_grid(
    r_max: float,
    gamma: float,
    n_core: int = 0,
    n_far: int = 0,
    *,
    core_end: float = 2.0,
    grading_ratio: float = 1.05,
    extra_edges: tuple[float, ...] = (),
    uniform: bool = False,
) -> RadialGrid:
    """Graded radial grid: near-uniform core resolving scale 1/gamma, geometric far field.

    The core [0, core_end] is piecewise uniform between structural breakpoints
    (1/sqrt(2), 3/4, 1, ... always exact edges) with spacing at most
    min(1/(4*gamma), 1/64); n_core can force a finer core.  Beyond core_end the
    spacing grows geometrically with ratio <= grading_ratio; n_far can force
    more far cells.  uniform=True ignores the resolution floor and produces
    exactly n_core equal cells (test fixture mode).
    """
    if r_max < core_end and not uniform:
        raise ValueError(f"r_max must be >= {core_end}")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")

    if uniform:
        if n_core < 1:
            raise ValueError("uniform mode needs n_core >= 1")
        edges = r_max * np.arange(n_core + 1) / n_core
        edges[0] = 0.0
        return RadialGrid(edges=np.array(edges))

    h_cap = min(1.0 / (4.0 * gamma) if gamma > 0 else np.inf, 1.0 / 64.0)
    if n_core > 0:
        h_cap = min(h_cap, core_end / n_core)

    marks = sorted(
        {core_end}
        | {e for e in STRUCTURAL_EDGES if 0.0 < e < core_end}
        | {e for e in extra_edges if 0.0 < e < core_end}
    )
    edges = [0.0]
    lo = 0.0
    for m in marks:
        edges.extend(_refine(lo, m, h_cap))
        lo = m

    far_marks = sorted({e for e in extra_edges if core_end < e < r_max}) + [r_max]
    for m in far_marks:
        if m <= lo * (1.0 + 1e-12):
            continue
        edges.extend(_geometric_segment(lo, m, edges[-1] - edges[-2], grading_ratio, n_far))
        lo = m

    return RadialGrid(edges=np.array(edges))


def _geometric_segment(
    a: float, b: float, h0: float, ratio: float, n_min: int
) -> np.ndarray:
    """Edges in (a, b] with spacing growing from ~h0 by at most `ratio` per cell."""
    length = b - a
    if length <= h0:
        return np.array([b])
    # smallest n such that h0*(ratio^n - 1)/(ratio - 1) >= length
    n = max(1, n_min)
    while h0 * (ratio**n - 1.0) / (ratio - 1.0) < length and n < 100000:
        n += 1
    # shrink the actual ratio q <= ratio so n cells land exactly on b
    lo_q, hi_q = 1.0, ratio
    for _ in range(80):
        q = 0.5 * (lo_q + hi_q)
        total = h0 * n if q == 1.0 else h0 * (q**n - 1.0) / (q - 1.0)
        if total < length:
            lo_q = q
        else:
            hi_q = q
    q = hi_q
    if h0 * n >= length:
        # even a flat profile overshoots: fall back to uniform spacing <= h0
        n = max(n, int(math.ceil(length / h0)))
        return a + length * np.arange(1, n + 1) / n
    steps = h0 * q ** np.arange(n)
    edges = a + np.cumsum(steps) * (length / np.sum(steps))
    edges[-1] = b
    return edges


def integrate(p: RadialProfile) -> float:
    """Total integral over the plane: sum of cell values times annulus areas."""
    if p.kind is not ProfileKind.DENSITY:
        raise ValueError("integrate expects a density profile")
    return float(np.dot(p.values, p.grid.volumes))


def to_mass_function(p: RadialProfile) -> RadialProfile:
    """Edge-indexed cumulative mass M(r_i) = integral over the ball of radius r_i."""
    if p.kind is not ProfileKind.DENSITY:
        raise ValueError("to_mass_function expects a density profile")
    m = np.concatenate(([0.0], np.cumsum(p.values * p.grid.volumes)))
    return RadialProfile(grid=p.grid, values=m, kind=ProfileKind.MASS_FUNCTION)


def from_mass_function(m: RadialProfile) -> RadialProfile:
    """Cell densities recovered from an edge-indexed mass function."""
    if m.kind is not ProfileKind.MASS_FUNCTION:
        raise ValueError("from_mass_function expects a mass-function profile")
    rho = np.diff(m.values) / m.grid.volumes
    return RadialProfile(grid=m.grid, values=rho, kind=ProfileKind.DENSITY)


def profile_from_function(grid: RadialGrid, fn, kind: ProfileKind = ProfileKind.DENSITY) -> RadialProfile:
    """Sample a callable at the natural radii for the given profile kind."""
    radii = grid.edges if kind is ProfileKind.MASS_FUNCTION else grid.centers
    return RadialProfile(grid=grid, values=np.asarray(fn(radii), dtype=float), kind=kind)
