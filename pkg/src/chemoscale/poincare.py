"""Weighted Poincare inequality workbench.

Verifies the three-block inequalities for steep radial weights: deviations
measured against the angular average at the plateau edge, Dirichlet energy
split over the plateau, the transition annulus, and the far region (where the
energy carries an extra r^2 factor).  Angular dependence enters through a
cosine/sine mode decomposition; each mode contributes separately to every
block.  A Rayleigh-quotient solver estimates extremal ratios to witness how
the far-region constant scales with the steepness parameter.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid import RadialGrid
from .numerics import gauss_panels, log_weighted_sum, tridiag_solve
from .potential import WeightSpec, power_law_weight

__all__ = [
    "ModeProfile",
    "BlockFunctionals",
    "BlockInequalityReport",
    "CombinedReport",
    "TruncatedReport",
    "PowerWeightReport",
    "RayleighResult",
    "ReportRow",
    "BATTERY_VERSION",
    "mode_functionals",
    "verify_block_inequalities",
    "verify_combined",
    "verify_truncated",
    "verify_power_weight",
    "best_constant",
    "standard_battery",
    "battery_report",
    "write_report_csv",
]

BATTERY_VERSION = "v1"


@dataclass(frozen=True)
class ModeProfile:
    """One angular mode of a test function: index n and its radial coefficient.

    coeff and dcoeff are callables evaluated at quadrature nodes; mode 0 is
    the angular average and higher modes multiply cos/sin(n phi).  For n >= 1
    the coefficient must vanish at the origin (otherwise the n^2/r^2 energy
    term diverges).
    """

    n: int
    coeff: Callable[[np.ndarray], np.ndarray]
    dcoeff: Callable[[np.ndarray], np.ndarray]
    grid: RadialGrid

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise ValueError("mode index must be a nonnegative integer")
        if self.n >= 1:
            probe = float(np.atleast_1d(self.coeff(np.array([1e-9])))[0])
            if abs(probe) > 1e-6:
                raise ValueError(
                    "mode coefficients with n >= 1 must vanish at the origin"
                )


@dataclass(frozen=True)
class BlockFunctionals:
    """Weighted deviation and energy integrals over the three radial blocks."""

    i1: float
    i2: float
    i3: float
    j1: float
    j2: float
    j3: float
    truncation_radius: float | None = None

    def __post_init__(self):
        for name in ("i1", "i2", "i3", "j1", "j2", "j3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= -1e-300):
                raise ValueError(f"block functional {name} must be finite and nonnegative")

    @property
    def i_total(self) -> float:
        return self.i1 + self.i2 + self.i3

    def __add__(self, other: "BlockFunctionals") -> "BlockFunctionals":
        if self.truncation_radius != other.truncation_radius:
            raise ValueError("cannot add functionals with different truncations")
        return BlockFunctionals(
            self.i1 + other.i1,
            self.i2 + other.i2,
            self.i3 + other.i3,
            self.j1 + other.j1,
            self.j2 + other.j2,
            self.j3 + other.j3,
            self.truncation_radius,
        )


def _block_nodes(grid: RadialGrid, lo: float, hi: float, order: int):
    """Gauss nodes/weights on the grid panels covering [lo, hi]."""
    a = grid.edge_index(lo)
    b = grid.edge_index(hi)
    if b <= a:
        return np.empty(0), np.empty(0)
    return gauss_panels(grid.edges[a : b + 1], order=order)


def _log_u(w: WeightSpec, r: np.ndarray) -> np.ndarray:
    """Log of the polar-measure weight u(r) = r w(r)."""
    return np.log(r) + w.log_weight(r)


def mode_functionals(
    m: ModeProfile,
    w: WeightSpec,
    R: float | None = None,
    *,
    order: int = 6,
) -> BlockFunctionals:
    """Block integrals of one angular mode against the weight.

    Mode 0 deviations are measured against the coefficient value at the
    plateau edge; higher modes against zero.  The far block carries the extra
    r^2 energy factor; passing R truncates the far block at that radius
    (which must be a grid edge beyond the transition).
    """
    grid = m.grid
    r1, r2 = w.r1, w.r2
    hi = grid.r_max if R is None else float(R)
    if R is not None:
        if hi <= r2:
            raise ValueError("truncation radius must exceed the transition radius")
        grid.edge_index(hi)
    pref = 2.0 * math.pi if m.n == 0 else math.pi
    center = float(np.atleast_1d(m.coeff(np.array([r1])))[0]) if m.n == 0 else 0.0

    out = {}
    for name, lo, up, energy_r2 in (
        ("1", 0.0, r1, False),
        ("2", r1, r2, False),
        ("3", r2, hi, True),
    ):
        nodes, wts = _block_nodes(grid, lo, up, order)
        if nodes.size == 0:
            out[f"i{name}"] = 0.0
            out[f"j{name}"] = 0.0
            continue
        c = np.asarray(m.coeff(nodes), dtype=float)
        dc = np.asarray(m.dcoeff(nodes), dtype=float)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(dc))):
            raise ValueError("mode coefficient produced non-finite values")
        log_w = w.log_weight(nodes)
        dev = (c - center) ** 2
        grad = dc * dc
        if m.n >= 1:
            grad = grad + (m.n**2) * c * c / nodes**2
        if energy_r2:
            grad = grad * nodes**2
        out[f"i{name}"] = pref * log_weighted_sum(dev * nodes, log_w, wts)
        out[f"j{name}"] = pref * log_weighted_sum(grad * nodes, log_w, wts)
    return BlockFunctionals(
        out["i1"], out["i2"], out["i3"], out["j1"], out["j2"], out["j3"], R
    )


def _as_modes(modes) -> list[ModeProfile]:
    if isinstance(modes, ModeProfile):
        return [modes]
    modes = list(modes)
    if not modes:
        raise ValueError("need at least one mode")
    return modes


def _sum_blocks(modes: list[ModeProfile], w: WeightSpec, R=None, order=6) -> BlockFunctionals:
    total = mode_functionals(modes[0], w, R, order=order)
    for m in modes[1:]:
        total = total + mode_functionals(m, w, R, order=order)
    return total


def _ratio(num: float, den: float) -> float:
    if num <= 0.0:
        return 0.0
    if den <= 0.0:
        return math.inf
    return num / den


@dataclass(frozen=True)
class BlockInequalityReport:
    """Smallest constants closing each block inequality for one test function."""

    c1: float
    c2: float
    c3: float
    residual2: float
    residual3: float
    blocks: BlockFunctionals
    gamma: float


def verify_block_inequalities(modes, w: WeightSpec) -> BlockInequalityReport:
    """Fit the smallest admissible constant in each of the three block bounds.

    The second and third bounds include a quarter of the previous deviation
    block on the right side; residuals record what is left for the energy
    terms to cover after that quarter is taken out.
    """
    modes = _as_modes(modes)
    if w.gamma <= 0:
        raise ValueError("block inequalities need a positive steepness gamma")
    g = w.gamma
    b = _sum_blocks(modes, w)
    r2 = max(0.0, b.i2 - 0.25 * b.i1)
    r3 = max(0.0, b.i3 - 0.25 * b.i2)
    return BlockInequalityReport(
        c1=_ratio(b.i1, b.j1),
        c2=_ratio(r2, (b.j1 + b.j2) / g),
        c3=_ratio(r3, (b.j2 + b.j3) / g**2),
        residual2=r2,
        residual3=r3,
        blocks=b,
        gamma=g,
    )


def _weighted_global_mean(modes: list[ModeProfile], w: WeightSpec, order=6) -> float:
    """Weight-averaged value of the function; only mode 0 contributes."""
    radial = [m for m in modes if m.n == 0]
    grid = modes[0].grid
    nodes, wts = gauss_panels(grid.edges, order=order)
    log_w = w.log_weight(nodes)
    den = log_weighted_sum(nodes, log_w, wts)
    if den <= 0:
        raise ValueError("weight has zero mass on the grid")
    num = 0.0
    for m in radial:
        c = np.asarray(m.coeff(nodes), dtype=float)
        num += log_weighted_sum(c * nodes, log_w, wts)
    return num / den


def _variance_about(modes: list[ModeProfile], w: WeightSpec, center: float, order=6) -> float:
    grid = modes[0].grid
    nodes, wts = gauss_panels(grid.edges, order=order)
    log_w = w.log_weight(nodes)
    total = 0.0
    for m in modes:
        c = np.asarray(m.coeff(nodes), dtype=float)
        pref = 2.0 * math.pi if m.n == 0 else math.pi
        dev = (c - center) ** 2 if m.n == 0 else c * c
        total += pref * log_weighted_sum(dev * nodes, log_w, wts)
    return total


@dataclass(frozen=True)
class CombinedReport:
    fitted_c: float
    z: float
    i_total: float
    j_combo: float
    centering_ok: bool
    gamma: float


def verify_combined(modes, w: WeightSpec) -> CombinedReport:
    """Fit the constant in the summed inequality for the variance about the mean.

    Also confirms the mean-centered variance never exceeds the plateau-edge
    centered deviation integral (the mean is the optimal centering).
    """
    modes = _as_modes(modes)
    if w.gamma <= 0:
        raise ValueError("combined inequality needs a positive steepness gamma")
    g = w.gamma
    b = _sum_blocks(modes, w)
    fbar = _weighted_global_mean(modes, w)
    z = _variance_about(modes, w, fbar)
    j_combo = b.j1 + b.j2 / g + b.j3 / g**2
    return CombinedReport(
        fitted_c=_ratio(z, j_combo),
        z=z,
        i_total=b.i_total,
        j_combo=j_combo,
        centering_ok=bool(z <= b.i_total * (1 + 1e-12) + 1e-300),
        gamma=g,
    )


@dataclass(frozen=True)
class TruncatedReport:
    c3_truncated: float
    fitted_c_combined: float
    i_r: float
    blocks: BlockFunctionals
    gamma: float


def verify_truncated(modes, w: WeightSpec, R: float) -> TruncatedReport:
    """Same fits with the far block cut at radius R (a grid edge beyond r2)."""
    modes = _as_modes(modes)
    if w.gamma <= 0:
        raise ValueError("truncated inequality needs a positive steepness gamma")
    g = w.gamma
    b = _sum_blocks(modes, w, R=R)
    r3 = max(0.0, b.i3 - 0.25 * b.i2)
    return TruncatedReport(
        c3_truncated=_ratio(r3, (b.j2 + b.j3) / g**2),
        fitted_c_combined=_ratio(b.i_total, b.j1 + b.j2 / g + b.j3 / g**2),
        i_r=b.i_total,
        blocks=b,
        gamma=g,
    )


@dataclass(frozen=True)
class PowerWeightReport:
    fitted_c: float
    bobkov_ledoux_c: float
    z: float
    energy_core: float
    energy_far: float
    gamma: float


def verify_power_weight(modes, gamma: float, *, min_gamma: float = 32.0) -> PowerWeightReport:
    """Fit the split-form constant for the algebraic weight (1+r^2)^(-gamma/2).

    The split puts a 1/gamma factor on the unit-ball energy and 1/gamma^2 on
    the outside energy (which carries the 1+r^2 factor).  For contrast the
    report also fits the single-term classical form with 1/gamma on the whole
    energy, whose constant is what the split improves upon far from the ball.
    """
    modes = _as_modes(modes)
    if gamma < min_gamma:
        raise ValueError(f"power-weight fit expects gamma >= {min_gamma}")
    grid = modes[0].grid
    v = power_law_weight(gamma, r_far=grid.r_max)
    fbar = _weighted_global_mean(modes, v)
    z = _variance_about(modes, v, fbar)

    def energy(lo, hi, with_factor):
        total = 0.0
        nodes, wts = _block_nodes(grid, lo, hi, 6)
        log_w = v.log_weight(nodes)
        for m in modes:
            c = np.asarray(m.coeff(nodes), dtype=float)
            dc = np.asarray(m.dcoeff(nodes), dtype=float)
            grad = dc * dc
            if m.n >= 1:
                grad = grad + (m.n**2) * c * c / nodes**2
            if with_factor:
                grad = grad * (1.0 + nodes**2)
            pref = 2.0 * math.pi if m.n == 0 else math.pi
            total += pref * log_weighted_sum(grad * nodes, log_w, wts)
        return total

    e_core = energy(0.0, 1.0, False)
    e_far = energy(1.0, grid.r_max, True)
    e_bl = energy(0.0, 1.0, True) + e_far
    return PowerWeightReport(
        fitted_c=_ratio(z, e_core / gamma + e_far / gamma**2),
        bobkov_ledoux_c=_ratio(z, e_bl / gamma),
        z=z,
        energy_core=e_core,
        energy_far=e_far,
        gamma=gamma,
    )


@dataclass(frozen=True)
class RayleighResult:
    """Extremal ratio of a deviation form over an energy form, with extremizer."""

    value: float
    radii: np.ndarray
    profile: np.ndarray
    iterations: int
    residual: float
    converged: bool


def best_constant(
    w: WeightSpec,
    grid: RadialGrid,
    region: str = "far",
    *,
    mode_n: int = 0,
    jacobian: bool = True,
    max_iters: int = 500,
    tol: float = 1e-11,
) -> RayleighResult:
    """Extremal deviation-to-energy ratio over profiles confined to one region.

    region "far": support outside the transition radius, pinned to zero
    there, with the r^2 energy factor (the far-block quotient).  region
    "core": support inside the plateau with free ends; constants carry no
    energy, so the quotient is taken over mean-zero profiles and the
    one-dimensional null space is deflated explicitly at every iteration.

    Solved by inverse power iteration on the energy-form-preconditioned
    pencil; no external eigensolver is involved.
    """
    if region not in ("far", "core"):
        raise ValueError("region must be 'far' or 'core'")
    far = region == "far"
    pin = w.r2 if far else None
    lo, hi = (w.r2, grid.r_max) if far else (0.0, w.r1)
    grid.edge_index(w.r2 if far else w.r1)
    sel = (grid.centers > lo) & (grid.centers <= hi)
    c = grid.centers[sel]
    h = np.diff(grid.edges)[sel]
    n = c.size
    if n < 3:
        raise ValueError("region holds too few cells for an extremal profile")

    def meas(r):
        base = np.exp(w.log_weight(np.asarray(r, dtype=float)))
        return base * np.asarray(r) if jacobian else base

    m_diag = meas(c) * h
    if mode_n >= 1:
        extra = (mode_n**2) / c**2 * meas(c) * h
        if far:
            extra = extra * c**2
    else:
        extra = np.zeros(n)

    # face conductances of the energy form, at midpoints between nodes
    face_r = 0.5 * (c[:-1] + c[1:])
    k_face = meas(face_r) / np.diff(c)
    if far:
        k_face = k_face * face_r**2
    diag = np.zeros(n)
    diag[:-1] += k_face
    diag[1:] += k_face
    if far:
        k0 = meas(pin) * pin**2 / (c[0] - pin)
        diag[0] += k0
    diag += extra
    lower = -k_face
    upper = -k_face

    lam_scale = float(np.sum(diag) / np.sum(m_diag))
    eps = 1e-9 * lam_scale
    kd = diag + eps * m_diag

    def project(x):
        if far:
            return x
        mean = float(np.dot(m_diag, x) / np.sum(m_diag))
        return x - mean

    rng = np.random.default_rng(0)
    x = project(rng.standard_normal(n))
    x /= math.sqrt(float(np.dot(m_diag, x * x)))
    ratio_prev = math.inf
    ratio = 0.0
    iters = 0
    for iters in range(1, max_iters + 1):
        y = tridiag_solve(lower, kd, upper, m_diag * x)
        y = project(y)
        nrm = math.sqrt(float(np.dot(m_diag, y * y)))
        if nrm == 0.0:
            raise ValueError("iteration collapsed onto the deflated space")
        x = y / nrm
        ky = diag * x
        ky[:-1] += upper * x[1:]
        ky[1:] += lower * x[:-1]
        num = float(np.dot(m_diag, x * x))
        den = float(np.dot(x, ky))
        ratio = num / den if den > 0 else math.inf
        if abs(ratio - ratio_prev) <= tol * max(abs(ratio), 1e-300):
            break
        ratio_prev = ratio
    lam = 1.0 / ratio if ratio > 0 and math.isfinite(ratio) else 0.0
    res_vec = ky - lam * m_diag * x
    residual = float(np.linalg.norm(res_vec) / max(np.linalg.norm(m_diag * x) * lam, 1e-300))
    return RayleighResult(
        value=ratio,
        radii=c,
        profile=x,
        iterations=iters,
        residual=residual,
        converged=iters < max_iters,
    )


# --- fixed test-function battery (versioned) ---------------------------------


def _taper(n: int, a: float = 0.5):
    if n == 0:
        return (lambda r: np.ones_like(r)), (lambda r: np.zeros_like(r))

    def t(r):
        return np.tanh(r / a) ** n

    def dt(r):
        th = np.tanh(r / a)
        return n * th ** (n - 1) * (1.0 - th**2) / a

    return t, dt


def _product(f, df, g, dg):
    return (lambda r: f(r) * g(r)), (lambda r: df(r) * g(r) + f(r) * dg(r))


def _gaussian(center: float, width: float):
    s2 = 2.0 * width * width

    def f(r):
        return np.exp(-((r - center) ** 2) / s2)

    def df(r):
        return -2.0 * (r - center) / s2 * np.exp(-((r - center) ** 2) / s2)

    return f, df


def _smooth_annulus(a: float, b: float, m: float = 0.1):
    def f(r):
        return 0.5 * (np.tanh((r - a) / m) - np.tanh((r - b) / m))

    def df(r):
        return 0.5 * ((1 - np.tanh((r - a) / m) ** 2) - (1 - np.tanh((r - b) / m) ** 2)) / m

    return f, df


def _damped_sine(k: float):
    def f(r):
        return np.sin(k * r) * np.exp(-r / 2.0)

    def df(r):
        return (k * np.cos(k * r) - 0.5 * np.sin(k * r)) * np.exp(-r / 2.0)

    return f, df


def standard_battery(grid: RadialGrid) -> list[tuple[str, ModeProfile]]:
    """The fixed v1 family of test modes; identifiers are stable across runs."""
    items: list[tuple[str, ModeProfile]] = []
    for center in (0.0, 1.0, 2.0, 4.0):
        for width in (0.25, 0.5, 1.0):
            for n in (0, 1, 2):
                f, df = _gaussian(center, width)
                t, dt = _taper(n)
                cf, cdf = _product(f, df, t, dt)
                items.append(
                    (
                        f"gauss-c{center:g}-w{width:g}-n{n}",
                        ModeProfile(n=n, coeff=cf, dcoeff=cdf, grid=grid),
                    )
                )
    for a, b in ((0.5, 1.0), (1.0, 2.0)):
        f, df = _smooth_annulus(a, b)
        items.append(
            (
                f"annulus-{a:g}-{b:g}-n0",
                ModeProfile(n=0, coeff=f, dcoeff=df, grid=grid),
            )
        )
    for k in (1.0, 2.0):
        for n in (0, 1, 2):
            f, df = _damped_sine(k)
            t, dt = _taper(n)
            cf, cdf = _product(f, df, t, dt)
            items.append(
                (
                    f"sine-k{k:g}-n{n}",
                    ModeProfile(n=n, coeff=cf, dcoeff=cdf, grid=grid),
                )
            )
    return items


@dataclass(frozen=True)
class ReportRow:
    weight_kind: str
    gamma: float
    inequality_id: str
    fitted_C: float
    extremal_ratio: float | None
    battery_id: str


def battery_report(w: WeightSpec, grid: RadialGrid, items=None) -> list[ReportRow]:
    """One row per battery item and inequality, for the report CSV."""
    if items is None:
        items = standard_battery(grid)
    rows = []
    for bid, mode in items:
        rep = verify_block_inequalities([mode], w)
        comb = verify_combined([mode], w)
        for iid, c in (
            ("block1", rep.c1),
            ("block2", rep.c2),
            ("block3", rep.c3),
            ("combined", comb.fitted_c),
        ):
            rows.append(
                ReportRow(
                    weight_kind=w.kind,
                    gamma=w.gamma,
                    inequality_id=iid,
                    fitted_C=c,
                    extremal_ratio=None,
                    battery_id=bid,
                )
            )
    return rows


def write_report_csv(path: str | Path, rows: Sequence[ReportRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(
            ["weight_kind", "gamma", "inequality_id", "fitted_C", "extremal_ratio", "battery_id"]
        )
        for row in rows:
            wr.writerow(
                [
                    row.weight_kind,
                    f"{row.gamma:.10g}",
                    row.inequality_id,
                    f"{row.fitted_C:.10g}",
                    "" if row.extremal_ratio is None else f"{row.extremal_ratio:.10g}",
                    row.battery_id,
                ]
            )
    return path
