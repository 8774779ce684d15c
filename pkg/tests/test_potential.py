import math

import numpy as np
import pytest

from chemoscale.grid import ProfileKind, RadialProfile, build_graded_grid, profile_from_function
from chemoscale.potential import (
    AnnulusPotential,
    annulus_potential,
    concentration_compare,
    ground_state_weight,
    inverse_laplacian_radial,
    power_law_weight,
    radial_drift,
)

SQRT_HALF = 1.0 / math.sqrt(2.0)


def annulus_density(grid, theta=1.0):
    return profile_from_function(
        grid, lambda r: theta * ((r > SQRT_HALF) & (r < 1.0)).astype(float)
    )


class TestClosedForm:
    def test_plateau_value_gamma_40(self):
        pot = annulus_potential(40.0)
        assert abs(pot.eval_H(0.0) - 1.5342640972002735) < 1e-12
        assert abs(pot.plateau_value - 5.0 * (1.0 - math.log(2.0))) < 1e-12

    def test_far_field_gamma_40(self):
        pot = annulus_potential(40.0)
        assert abs(math.exp(pot.eval_H(2.0)) - 2.0**-10) < 1e-13
        assert abs(pot.eval_dH(2.0) - (-5.0)) < 1e-12

    @pytest.mark.parametrize("gamma", [16.0, 40.0, 128.0])
    def test_continuity_at_breakpoints(self, gamma):
        pot = annulus_potential(gamma)
        for r in (SQRT_HALF, 1.0):
            below = pot.eval_H(r - 1e-9)
            above = pot.eval_H(r + 1e-9)
            assert abs(below - above) < 1e-7 * gamma

    def test_shape_is_linear_in_gamma(self):
        r = np.linspace(0.0, 3.0, 301)
        h1 = annulus_potential(16.0).eval_H(r)
        h2 = annulus_potential(64.0).eval_H(r)
        assert np.max(np.abs(h2 - 4.0 * h1)) < 1e-12 * 64.0

    def test_drift_zero_on_plateau_and_at_origin(self):
        pot = annulus_potential(64.0)
        r = np.linspace(0.0, SQRT_HALF - 1e-6, 50)
        assert np.max(np.abs(pot.eval_dH(r))) == 0.0


class TestInverseLaplacian:
    def test_matches_closed_form_on_annulus(self):
        gamma = 40.0
        grid = build_graded_grid(4.0, gamma=gamma)
        g = annulus_density(grid)
        pot = annulus_potential(gamma)
        prof = inverse_laplacian_radial(g, chi=gamma)
        assert np.max(np.abs(prof.values - pot.eval_H(grid.centers))) < 1e-12 * gamma
        at = inverse_laplacian_radial(g, chi=gamma, at=np.array([0.0, SQRT_HALF, 0.75, 1.0, 2.0]))
        expected = pot.eval_H(np.array([0.0, SQRT_HALF, 0.75, 1.0, 2.0]))
        assert np.max(np.abs(at - expected)) < 1e-12 * gamma

    def test_far_field_log_decay_unit_mass(self):
        grid = build_graded_grid(6.0, gamma=32.0)
        g = profile_from_function(grid, lambda r: (r < 1.0).astype(float) / math.pi)
        rr = np.array([1.0, 1.7, 2.5, 4.0])
        vals = inverse_laplacian_radial(g, at=rr)
        assert np.max(np.abs(vals - (-np.log(rr) / (2.0 * math.pi)))) < 1e-13

    def test_against_cartesian_convolution_oracle(self):
        # independent route: midpoint convolution with the plane Green kernel
        h = 1.0 / 64.0
        ax = np.arange(-1.0 + h / 2.0, 1.0, h)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        R2 = X**2 + Y**2
        gsrc = (R2 < 1.0).astype(float) / math.pi

        def oracle(r):
            d2 = (r - X) ** 2 + Y**2
            return float(np.sum(-np.log(np.maximum(d2, 1e-30)) / (4.0 * math.pi) * gsrc) * h * h)

        grid = build_graded_grid(6.0, gamma=32.0)
        g = profile_from_function(grid, lambda r: (r < 1.0).astype(float) / math.pi)
        for r in (0.5, 1.5, 2.0, 3.0):
            mine = float(inverse_laplacian_radial(g, at=np.array([r]))[0])
            assert abs(mine - oracle(r)) < 2e-3

    def test_interior_closed_form_unit_disk(self):
        grid = build_graded_grid(4.0, gamma=32.0)
        g = profile_from_function(grid, lambda r: (r < 1.0).astype(float) / math.pi)
        rr = np.array([0.0, 0.3, 0.6, 0.9])
        vals = inverse_laplacian_radial(g, at=rr)
        assert np.max(np.abs(vals - (1.0 - rr**2) / (4.0 * math.pi))) < 1e-12

    def test_rejects_uncontained_support(self):
        grid = build_graded_grid(3.0, gamma=16.0)
        bad = profile_from_function(grid, lambda r: np.ones_like(r))
        with pytest.raises(ValueError, match="outermost cell"):
            inverse_laplacian_radial(bad)


class TestDrift:
    def test_annulus_drift_values(self):
        gamma = 40.0
        grid = build_graded_grid(4.0, gamma=gamma)
        g = annulus_density(grid)
        pot = annulus_potential(gamma)
        rr = np.array([0.0, 0.5, 0.8, 1.0, 2.0, 3.0])
        d = radial_drift(g, chi=gamma, at=rr)
        assert np.max(np.abs(d - pot.eval_dH(rr))) < 1e-12 * gamma
        assert d[0] == 0.0

    def test_zero_source_zero_drift(self):
        grid = build_graded_grid(3.0, gamma=16.0)
        z = profile_from_function(grid, lambda r: np.zeros_like(r))
        d = radial_drift(z)
        assert np.max(np.abs(d.values)) == 0.0

    def test_consistency_with_potential_derivative(self):
        grid = build_graded_grid(5.0, gamma=32.0)
        g = profile_from_function(grid, lambda r: np.exp(-((r - 1.5) ** 2) * 4.0) * (r < 3.5))
        rr = np.linspace(0.2, 4.0, 37)
        delta = 1e-5
        hp = inverse_laplacian_radial(g, chi=2.0, at=rr + delta)
        hm = inverse_laplacian_radial(g, chi=2.0, at=rr - delta)
        fd = (hp - hm) / (2.0 * delta)
        d = radial_drift(g, chi=2.0, at=rr)
        assert np.max(np.abs(fd - d)) < 1e-5


class TestWeights:
    @pytest.mark.parametrize("gamma", [16.0, 32.0, 64.0, 128.0])
    def test_ground_state_constants(self, gamma):
        w = ground_state_weight(gamma)
        assert abs(w.C0 - 1.0) < 1e-12  # exact plateau
        # transition constant: min of (2r - 1/r)/(4(r - r1)), attained at r2
        expect_c1 = (2.0 * 0.75 - 1.0 / 0.75) / (4.0 * (0.75 - SQRT_HALF))
        assert abs(w.C1 - expect_c1) < 1e-3
        # tail constant: min of (2r^2 - 1)/4 on [3/4, 1), i.e. 1/32
        assert abs(w.C2 - 1.0 / 32.0) < 1e-4

    def test_ground_state_tail_constant_beyond_unit_radius(self):
        pot = annulus_potential(64.0)
        r = np.geomspace(1.0, 50.0, 200)
        ratio = -pot.eval_dH(r) * r / 64.0
        assert np.max(np.abs(ratio - 0.25)) < 1e-12

    @pytest.mark.parametrize("gamma", [16.0, 64.0, 128.0])
    def test_power_weight_plateau_below_e_squared(self, gamma):
        w = power_law_weight(gamma)
        direct = (1.0 + 4.0 / gamma) ** (gamma / 2.0)
        assert abs(w.C0 - direct) < 1e-10 * direct
        assert w.C0 < math.e**2
        assert w.C1 > 0.4 and w.C2 > 0.4

    def test_constants_are_gamma_stable(self):
        c1 = [ground_state_weight(g).C1 for g in (16.0, 64.0, 128.0)]
        c2 = [ground_state_weight(g).C2 for g in (16.0, 64.0, 128.0)]
        assert max(c1) / min(c1) < 1.01
        assert max(c2) / min(c2) < 1.01


class TestConcentrationCompare:
    def test_inner_ball_dominates_spread_ball(self):
        grid = build_graded_grid(3.0, gamma=32.0)
        tight = profile_from_function(grid, lambda r: (r < 0.5).astype(float))
        spread = profile_from_function(grid, lambda r: 0.25 * (r < 1.0).astype(float))
        res = concentration_compare(tight, spread)
        assert res.more_concentrated
        assert res.drift_ordered
        rev = concentration_compare(spread, tight)
        assert not rev.more_concentrated
        assert rev.first_violation_radius is not None
        assert rev.first_violation_radius < 0.6

    def test_self_comparison_non_strict(self):
        grid = build_graded_grid(3.0, gamma=32.0)
        p = profile_from_function(grid, lambda r: np.exp(-(r**2)))
        res = concentration_compare(p, p)
        assert res.more_concentrated and res.drift_ordered

    def test_added_inner_mass_dominates(self):
        rng = np.random.default_rng(42)
        grid = build_graded_grid(4.0, gamma=16.0)
        for _ in range(10):
            base = rng.uniform(0.0, 1.0, grid.n_cells)
            bump = np.where(grid.centers < rng.uniform(0.3, 2.0), rng.uniform(0.1, 1.0), 0.0)
            a = RadialProfile(grid=grid, values=base + bump, kind=ProfileKind.DENSITY)
            b = RadialProfile(grid=grid, values=base, kind=ProfileKind.DENSITY)
            assert concentration_compare(a, b).more_concentrated
