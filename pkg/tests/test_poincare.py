"""Tests for the weighted Poincare workbench.

Oracles: hand integrals for polynomial modes, scipy adaptive quadrature for
block functionals, an exact angular-grid Parseval check, and the classical
interval Poincare constant for the Rayleigh solver.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from chemoscale.grid import build_graded_grid
from chemoscale.potential import ground_state_weight, uniform_weight
from chemoscale.numerics import gauss_panels
from chemoscale.poincare import (
    BATTERY_VERSION,
    ModeProfile,
    battery_report,
    best_constant,
    mode_functionals,
    standard_battery,
    verify_block_inequalities,
    verify_combined,
    verify_power_weight,
    verify_truncated,
    write_report_csv,
    _damped_sine,
    _gaussian,
    _product,
    _smooth_annulus,
    _taper,
)


@pytest.fixture(scope="module")
def g64():
    gamma = 64.0
    return gamma, ground_state_weight(gamma), build_graded_grid(8.0, gamma, extra_edges=(4.0,))


def _mode(grid, n, maker, *args):
    f, df = maker(*args)
    if n >= 1:
        f, df = _product(f, df, *_taper(n))
    return ModeProfile(n=n, coeff=f, dcoeff=df, grid=grid)


class TestModeFunctionals:
    def test_linear_mode_hand_integral(self):
        # coeff(r) = r, n = 1, unit weight: the energy over the plateau is
        # pi * integral of (1/r^2 * r^2 + 1) * r dr = pi * r1^2
        grid = build_graded_grid(4.0, 16.0, extra_edges=(2.0,))
        w = uniform_weight(r1=1.0, r2=2.0)
        m = ModeProfile(n=1, coeff=lambda r: r, dcoeff=lambda r: np.ones_like(r), grid=grid)
        b = mode_functionals(m, w)
        assert math.isclose(b.j1, math.pi, rel_tol=1e-13)

    def test_constant_radial_mode_has_no_deviation(self, g64):
        _, w, grid = g64
        m = ModeProfile(
            n=0, coeff=lambda r: np.full_like(r, 2.5), dcoeff=lambda r: np.zeros_like(r), grid=grid
        )
        b = mode_functionals(m, w)
        assert b.i1 == 0.0 and b.i2 == 0.0 and b.i3 == 0.0
        assert b.j1 == 0.0 and b.j2 == 0.0 and b.j3 == 0.0

    def test_against_adaptive_quadrature_oracle(self, g64):
        _, w, grid = g64
        m = _mode(grid, 1, _gaussian, 1.0, 0.5)
        b = mode_functionals(m, w)

        def u(r):
            return r * math.exp(w.log_weight(np.array([r]))[0])

        def dev_integral(a, bnd):
            val, _ = quad(lambda r: m.coeff(np.array([r]))[0] ** 2 * u(r), a, bnd, limit=200)
            return math.pi * val

        def energy_integral(a, bnd, with_r2):
            def ig(r):
                c = m.coeff(np.array([r]))[0]
                d = m.dcoeff(np.array([r]))[0]
                g = d * d + c * c / r**2
                return g * (r**2 if with_r2 else 1.0) * u(r)

            val, _ = quad(ig, a, bnd, limit=200)
            return math.pi * val

        r1, r2 = w.r1, w.r2
        pairs = [
            (b.i1, dev_integral(0.0, r1)),
            (b.i2, dev_integral(r1, r2)),
            (b.i3, dev_integral(r2, grid.r_max)),
            (b.j1, energy_integral(0.0, r1, False)),
            (b.j2, energy_integral(r1, r2, False)),
            (b.j3, energy_integral(r2, grid.r_max, True)),
        ]
        for got, want in pairs:
            assert abs(got - want) <= 1e-8 * abs(want)

    def test_parseval_against_2d_quadrature(self, g64):
        _, w, grid = g64
        modes = [
            _mode(grid, 0, _gaussian, 0.5, 0.5),
            _mode(grid, 1, _gaussian, 1.0, 0.5),
            _mode(grid, 2, _damped_sine, 2.0),
        ]
        total = sum(
            (mode_functionals(m, w).i_total for m in modes[1:]),
            mode_functionals(modes[0], w).i_total,
        )
        nodes, wts = gauss_panels(grid.edges, order=6)
        n_phi = 64
        phi = np.linspace(0.0, 2 * math.pi, n_phi + 1)[:-1]
        wvals = np.exp(w.log_weight(nodes))
        F = (
            modes[0].coeff(nodes)[None, :]
            + np.cos(phi)[:, None] * modes[1].coeff(nodes)[None, :]
            + np.cos(2 * phi)[:, None] * modes[2].coeff(nodes)[None, :]
        )
        center = modes[0].coeff(np.array([w.r1]))[0]
        two_d = (2 * math.pi / n_phi) * float(
            np.sum((F - center) ** 2 * (wvals * nodes * wts)[None, :])
        )
        assert abs(total - two_d) <= 1e-10 * two_d

    def test_quadrature_self_convergence(self, g64):
        gamma, w, grid = g64
        fine = build_graded_grid(8.0, 2.0 * gamma, extra_edges=(4.0,))
        coarse_val = mode_functionals(_mode(grid, 0, _gaussian, 1.0, 0.5), w).i_total
        fine_val = mode_functionals(_mode(fine, 0, _gaussian, 1.0, 0.5), w).i_total
        assert abs(coarse_val - fine_val) <= 1e-9 * abs(fine_val)

    def test_truncation_monotone_and_consistent(self, g64):
        _, w, grid = g64
        m = _mode(grid, 0, _damped_sine, 1.0)
        full = mode_functionals(m, w)
        at_max = mode_functionals(m, w, R=grid.r_max)
        assert math.isclose(at_max.i3, full.i3, rel_tol=1e-12)
        assert math.isclose(at_max.j3, full.j3, rel_tol=1e-12)
        cut = mode_functionals(m, w, R=4.0)
        assert cut.i3 <= full.i3 and cut.j3 <= full.j3

    def test_truncation_validation(self, g64):
        _, w, grid = g64
        m = _mode(grid, 0, _gaussian, 1.0, 0.5)
        with pytest.raises(ValueError, match="transition"):
            mode_functionals(m, w, R=0.5)
        with pytest.raises(ValueError, match="not a grid edge"):
            mode_functionals(m, w, R=4.0001)

    def test_origin_regularity_enforced(self, g64):
        _, _, grid = g64
        f, df = _gaussian(0.0, 0.5)
        with pytest.raises(ValueError, match="origin"):
            ModeProfile(n=1, coeff=f, dcoeff=df, grid=grid)


class TestBlockInequalities:
    def test_constant_function_all_zero(self, g64):
        _, w, grid = g64
        m = ModeProfile(
            n=0, coeff=lambda r: np.full_like(r, 3.0), dcoeff=lambda r: np.zeros_like(r), grid=grid
        )
        rep = verify_block_inequalities([m], w)
        assert rep.c1 == 0.0 and rep.c2 == 0.0 and rep.c3 == 0.0

    def test_plateau_supported_constant_is_gamma_free(self):
        # the plateau of the weight is exactly flat, so the first-block ratio
        # cannot depend on the steepness at all
        vals = []
        for gamma in (16.0, 128.0):
            w = ground_state_weight(gamma)
            grid = build_graded_grid(8.0, gamma)
            m = _mode(grid, 0, _smooth_annulus, 0.1, 0.45)
            rep = verify_block_inequalities([m], w)
            vals.append(rep.c1)
        assert math.isclose(vals[0], vals[1], rel_tol=1e-6)

    def test_fit_scale_invariance(self, g64):
        _, w, grid = g64
        f, df = _gaussian(1.0, 0.5)
        m = ModeProfile(n=0, coeff=f, dcoeff=df, grid=grid)
        scaled = ModeProfile(
            n=0,
            coeff=lambda r: 7.0 * f(r) - 3.0,
            dcoeff=lambda r: 7.0 * df(r),
            grid=grid,
        )
        a = verify_block_inequalities([m], w)
        b = verify_block_inequalities([scaled], w)
        assert math.isclose(a.c1, b.c1, rel_tol=1e-10)
        assert math.isclose(a.c2, b.c2, rel_tol=1e-10)
        assert math.isclose(a.c3, b.c3, rel_tol=1e-10)

    def test_preasymptotic_growth_then_clamp(self):
        # at moderate steepness the third-block constant grows because the
        # quarter-carry term is not yet effective; deep in the asymptotic
        # regime the carry covers the far deviation entirely and the fitted
        # constant collapses to zero
        f, df = _damped_sine(2.0)
        c3 = {}
        for gamma in (64.0, 128.0, 2048.0):
            w = ground_state_weight(gamma)
            grid = build_graded_grid(8.0, gamma)
            m = ModeProfile(n=1, coeff=_product(f, df, *_taper(1))[0],
                            dcoeff=_product(f, df, *_taper(1))[1], grid=grid)
            c3[gamma] = verify_block_inequalities([m], w).c3
        assert c3[128.0] > 2.0 * c3[64.0]
        assert c3[2048.0] == 0.0


class TestCombined:
    def test_mean_centering_is_optimal(self, g64):
        _, w, grid = g64
        rep = verify_combined([_mode(grid, 0, _gaussian, 1.0, 0.5)], w)
        assert rep.centering_ok
        assert rep.z <= rep.i_total * (1 + 1e-12)
        assert 0.0 < rep.fitted_c < math.inf

    def test_multi_mode_aggregation(self, g64):
        _, w, grid = g64
        modes = [
            _mode(grid, 0, _gaussian, 0.5, 0.5),
            _mode(grid, 1, _gaussian, 1.0, 0.5),
        ]
        one = verify_combined([modes[0]], w)
        both = verify_combined(modes, w)
        assert both.z > one.z
        assert both.centering_ok


class TestTruncated:
    def test_consistency_with_untruncated(self, g64):
        _, w, grid = g64
        modes = [_mode(grid, 0, _gaussian, 1.0, 0.5)]
        tr = verify_truncated(modes, w, grid.r_max)
        full = verify_block_inequalities(modes, w)
        assert math.isclose(tr.c3_truncated, full.c3, rel_tol=1e-10)

    def test_truncated_blocks_smaller(self, g64):
        _, w, grid = g64
        modes = [_mode(grid, 0, _damped_sine, 1.0)]
        tr = verify_truncated(modes, w, 4.0)
        full = verify_block_inequalities(modes, w)
        assert tr.blocks.i3 <= full.blocks.i3
        assert tr.blocks.j3 <= full.blocks.j3
        assert tr.i_r <= full.blocks.i_total


class TestPowerWeight:
    def test_gamma_floor(self, g64):
        _, _, grid = g64
        with pytest.raises(ValueError, match="gamma"):
            verify_power_weight([_mode(grid, 0, _gaussian, 0.0, 0.5)], 16.0)

    def test_origin_gaussian_comparable_to_ground_state_weight(self, g64):
        gamma, w, grid = g64
        m = _mode(grid, 0, _gaussian, 0.0, 0.5)
        pw = verify_power_weight([m], gamma)
        gs = verify_combined([m], w)
        assert 0.0 < pw.fitted_c < 10.0 * gs.fitted_c
        assert pw.bobkov_ledoux_c > 0.0


class TestBestConstant:
    def test_classical_interval_constant(self):
        grid = build_graded_grid(1.0, 20.0, n_core=96, uniform=True)
        w = uniform_weight(r1=1.0, r2=1.0 + 1e-9)
        res = best_constant(w, grid, region="core", jacobian=False)
        want = 1.0 / math.pi**2
        assert res.converged
        assert abs(res.value - want) <= 0.01 * want

    def test_far_extremum_scales_like_inverse_square(self):
        vals = {}
        for gamma in (16.0, 32.0, 64.0, 128.0):
            w = ground_state_weight(gamma)
            grid = build_graded_grid(30.0, gamma)
            res = best_constant(w, grid, region="far")
            assert res.converged
            vals[gamma] = res.value
        gs = sorted(vals)
        slope = np.polyfit(np.log(gs), np.log([vals[g] for g in gs]), 1)[0]
        assert -2.3 < slope < -1.7

    def test_radial_mode_dominates_far_extremum(self):
        gamma = 32.0
        w = ground_state_weight(gamma)
        grid = build_graded_grid(30.0, gamma)
        by_mode = {
            n: best_constant(w, grid, region="far", mode_n=n).value for n in (0, 1, 2)
        }
        assert by_mode[0] > by_mode[1] > by_mode[2]

    def test_core_region_with_jacobian(self):
        gamma = 32.0
        w = ground_state_weight(gamma)
        grid = build_graded_grid(8.0, gamma)
        res = best_constant(w, grid, region="core")
        assert res.converged and res.value > 0.0

    def test_nonconvergence_reported_not_raised(self):
        gamma = 32.0
        w = ground_state_weight(gamma)
        grid = build_graded_grid(8.0, gamma)
        res = best_constant(w, grid, region="far", max_iters=1)
        assert not res.converged
        assert res.residual > 0.0

    def test_region_validation(self, g64):
        _, w, grid = g64
        with pytest.raises(ValueError, match="region"):
            best_constant(w, grid, region="middle")


class TestBattery:
    def test_fixed_composition(self, g64):
        _, _, grid = g64
        items = standard_battery(grid)
        assert BATTERY_VERSION == "v1"
        assert len(items) == 44
        ids = [bid for bid, _ in items]
        assert len(set(ids)) == 44
        assert "gauss-c1-w0.5-n2" in ids
        assert "annulus-0.5-1-n0" in ids
        assert "sine-k2-n1" in ids

    def test_report_rows_and_csv_determinism(self, tmp_path, g64):
        _, w, grid = g64
        items = standard_battery(grid)[:6]
        rows = battery_report(w, grid, items)
        assert len(rows) == 4 * 6
        p1 = write_report_csv(tmp_path / "a.csv", rows)
        p2 = write_report_csv(tmp_path / "b.csv", rows)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == "weight_kind,gamma,inequality_id,fitted_C,extremal_ratio,battery_id"
