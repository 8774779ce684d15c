"""Tests for the radial drift-diffusion engine.

Oracles: exact stationary invariance of the Bernoulli-weighted flux, the
closed-form heat kernel on a flat potential, the discrete energy identity
verified to roundoff, and frozen reference constants recomputed from the
closed-form potential.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from chemoscale.fokker_planck import (
    MilestoneConstants,
    TransportOperator,
    dual_solve,
    duality_invariant,
    fp_solve,
    mass_in_ball_from_Z,
    milestone_times,
    stationary_state,
    threshold_decompose,
    transport_front,
    verify_decay_bound,
    verify_linfty,
    write_frames,
    z_and_w,
)
from chemoscale.grid import (
    ProfileKind,
    RadialProfile,
    build_graded_grid,
    profile_from_function,
    to_mass_function,
)
from chemoscale.potential import annulus_potential

# sigma * exp(-H(0)) * mass^2 at gamma=40, sigma=0.01, mass=100, recomputed
# from the closed-form plateau height (gamma/8)(1 - log 2)
Z_SIGMA_REFERENCE = 21.561430397073494


@pytest.fixture(scope="module")
def medium_setup():
    gamma = 16.0
    pot = annulus_potential(gamma)
    grid = build_graded_grid(6.0, gamma)
    return gamma, pot, grid


class TestStationaryState:
    @pytest.mark.parametrize("gamma", [16.0, 64.0])
    def test_exact_invariance_per_step(self, gamma):
        pot = annulus_potential(gamma)
        grid = build_graded_grid(8.0, gamma)
        rho_s = stationary_state(5.0, pot, grid)
        op = TransportOperator(grid, pot.eval_H(grid.centers))
        vals = rho_s.values.copy()
        top = float(np.max(vals))
        for _ in range(20):
            vals = op.implicit_step(vals, 0.1)
        assert np.max(np.abs(vals - rho_s.values)) / top < 1e-10

    def test_mass_normalization(self, medium_setup):
        _, pot, grid = medium_setup
        rho_s = stationary_state(7.5, pot, grid)
        assert math.isclose(float(np.dot(rho_s.values, grid.volumes)), 7.5, rel_tol=1e-12)

    def test_negative_mass_rejected(self, medium_setup):
        _, pot, grid = medium_setup
        with pytest.raises(ValueError, match="nonnegative"):
            stationary_state(-1.0, pot, grid)


class TestForwardRun:
    def test_mass_conserved_and_positive(self):
        gamma = 40.0
        pot = annulus_potential(gamma)
        grid = build_graded_grid(6.0, gamma)
        rng = np.random.default_rng(11)
        rho0 = RadialProfile(
            grid=grid,
            values=rng.random(grid.n_cells) + 0.05,
            kind=ProfileKind.DENSITY,
        )
        traj = fp_solve(rho0, pot, 1.0, dt_max=0.01)
        mass0 = traj.diag_mass[0]
        assert np.max(np.abs(traj.diag_mass - mass0)) / mass0 < 1e-12
        assert float(np.min(traj.frames)) > -1e-10 * float(np.max(traj.frames))

    def test_heat_kernel_mass_function(self):
        # flat potential: compare against the exact spreading Gaussian
        n = 480
        grid = build_graded_grid(12.0, 1.0, n_core=n, uniform=True)
        total, s = 3.0, 0.25
        rho0 = profile_from_function(
            grid, lambda r: total / (4 * math.pi * s) * np.exp(-(r**2) / (4 * s))
        )
        traj = fp_solve(rho0, np.zeros(grid.n_cells), 1.0, dt_max=0.004)
        mf = to_mass_function(traj.frame(len(traj.times) - 1))
        for r in (1.0, 2.0, 3.0):
            got = float(np.interp(r, grid.edges, mf.values))
            want = total * (1.0 - math.exp(-(r**2) / (4 * (s + 1.0))))
            assert abs(got - want) / total < 0.02

    def test_rejects_bad_inputs(self, medium_setup):
        _, pot, grid = medium_setup
        rho0 = profile_from_function(grid, lambda r: np.exp(-(r**2)))
        with pytest.raises(ValueError, match="positive"):
            fp_solve(rho0, pot, -1.0)
        mf = to_mass_function(rho0)
        with pytest.raises(ValueError, match="density"):
            fp_solve(mf, pot, 1.0)

    def test_at_time_outside_range(self, medium_setup):
        _, pot, grid = medium_setup
        rho0 = profile_from_function(grid, lambda r: np.exp(-(r**2)))
        traj = fp_solve(rho0, pot, 0.5, dt_max=0.05)
        with pytest.raises(ValueError, match="outside"):
            traj.at_time(0.7)


class TestDissipationIdentity:
    @pytest.mark.parametrize("dt", [0.01, 0.003])
    def test_exact_discrete_identity(self, medium_setup, dt):
        # Z^n - Z^{n+1} = 2 dt W(f^{n+1}) + ||f^{n+1}-f^n||^2 in the
        # exp(H)-weighted norm, exactly, for the implicit step
        _, pot, grid = medium_setup
        h = pot.eval_H(grid.centers)
        op = TransportOperator(grid, h)
        shift = float(np.max(h))
        d = np.exp(h - shift)
        rng = np.random.default_rng(7)
        for _ in range(3):
            f = np.exp(-grid.centers**2) + 0.2 * rng.random(grid.n_cells)
            f1 = op.implicit_step(f * d, dt) / d
            z0, _ = z_and_w(f, h, grid, op=op)
            z1, w1 = z_and_w(f1, h, grid, op=op)
            incr = float(math.exp(shift) * np.sum((f1 - f) ** 2 * d * grid.volumes))
            lhs = z0 - z1
            rhs = 2 * dt * w1 + incr
            assert abs(lhs - rhs) / abs(lhs) < 1e-10

    def test_mode_term_increases_w(self, medium_setup):
        _, pot, grid = medium_setup
        h = pot.eval_H(grid.centers)
        f = np.exp(-grid.centers)
        _, w0 = z_and_w(f, h, grid, mode_n=0)
        _, w2 = z_and_w(f, h, grid, mode_n=2)
        assert w2 > w0

    def test_z_requires_grid_for_bare_array(self, medium_setup):
        _, pot, grid = medium_setup
        with pytest.raises(ValueError, match="grid"):
            z_and_w(np.ones(grid.n_cells), pot.eval_H(grid.centers))


class TestDualRun:
    def test_conjugation_equivalence(self, medium_setup):
        _, pot, grid = medium_setup
        h = pot.eval_H(grid.centers)
        shift = float(np.max(h))
        f0 = profile_from_function(grid, lambda r: 1.0 / (1.0 + r**2))
        ft = np.linspace(0.0, 1.0, 9)
        dual = dual_solve(f0, pot, 1.0, dt_max=0.02, frame_times=ft)
        rho0 = RadialProfile(
            grid=grid, values=f0.values * np.exp(h - shift), kind=ProfileKind.DENSITY
        )
        fwd = fp_solve(rho0, pot, 1.0, dt_max=0.02, frame_times=ft)
        back = np.exp(shift - h)
        for i in range(ft.size):
            np.testing.assert_allclose(
                dual.frames[i], fwd.frames[i] * back, rtol=1e-12, atol=1e-15
            )

    def test_weighted_content_conserved(self, medium_setup):
        _, pot, grid = medium_setup
        f0 = profile_from_function(grid, lambda r: np.tanh(r))
        traj = dual_solve(f0, pot, 1.0, dt_max=0.02)
        c0 = traj.diag_mass[0]
        assert np.max(np.abs(traj.diag_mass - c0)) / abs(c0) < 1e-11

    def test_maximum_principle(self, medium_setup):
        _, pot, grid = medium_setup
        f0 = profile_from_function(grid, lambda r: 0.5 + 0.5 * np.cos(3 * r))
        lo, hi = float(np.min(f0.values)), float(np.max(f0.values))
        traj = dual_solve(f0, pot, 1.0, dt_max=0.02)
        assert float(np.max(traj.frames)) <= hi * (1 + 1e-12)
        assert float(np.min(traj.frames)) >= lo - 1e-12 * (hi - lo)


class TestDualityPairing:
    def test_matched_dt_constant_to_roundoff(self, medium_setup):
        _, pot, grid = medium_setup
        T = 0.5
        ft = np.linspace(0.0, T, 17)
        rho0 = profile_from_function(grid, lambda r: np.exp(-3 * (r - 0.5) ** 2))
        f0 = profile_from_function(grid, lambda r: 1.0 / (1.0 + r**2))
        rt = fp_solve(rho0, pot, T, dt_max=0.003, frame_times=ft)
        ftj = dual_solve(f0, pot, T, dt_max=0.003, frame_times=ft)
        assert duality_invariant(rt, ftj, T, n_samples=17) < 1e-10

    def test_mismatched_dt_drift_halves(self, medium_setup):
        # dt pairs sit below the drift-limited step so the mismatch is real
        _, pot, grid = medium_setup
        T = 0.5
        ft = np.linspace(0.0, T, 17)
        rho0 = profile_from_function(grid, lambda r: np.exp(-3 * (r - 0.5) ** 2))
        f0 = profile_from_function(grid, lambda r: 1.0 / (1.0 + r**2))
        drifts = []
        for dt1, dt2 in ((0.003, 0.00185), (0.0015, 0.000925)):
            rt = fp_solve(rho0, pot, T, dt_max=dt1, frame_times=ft)
            ftj = dual_solve(f0, pot, T, dt_max=dt2, frame_times=ft)
            drifts.append(duality_invariant(rt, ftj, T, n_samples=17))
        assert drifts[0] < 2e-3
        assert drifts[0] / drifts[1] > 1.5

    def test_kind_checks(self, medium_setup):
        _, pot, grid = medium_setup
        rho0 = profile_from_function(grid, lambda r: np.exp(-(r**2)))
        rt = fp_solve(rho0, pot, 0.2, dt_max=0.05)
        with pytest.raises(ValueError, match="dual"):
            duality_invariant(rt, rt, 0.2)


class TestMilestones:
    def test_frozen_variance_floor(self):
        pot = annulus_potential(40.0)
        grid = build_graded_grid(4.0, 40.0)
        rho0 = stationary_state(100.0, pot, grid)
        ms = milestone_times(rho0, pot, sigma=0.01)
        assert math.isclose(ms.z_sigma, Z_SIGMA_REFERENCE, rel_tol=1e-9)

    def test_entry_time_formula(self):
        pot = annulus_potential(40.0)
        grid = build_graded_grid(4.0, 40.0)
        rho0 = stationary_state(100.0, pot, grid)
        ms = milestone_times(rho0, pot, sigma=0.01)
        want = 1.0 + math.log(100.0) + math.log(40.0)
        assert math.isclose(ms.t1, want, rel_tol=1e-12)
        assert ms.t2 >= ms.t1

    def test_floor_scales_with_sigma_and_mass(self):
        pot = annulus_potential(40.0)
        grid = build_graded_grid(4.0, 40.0)
        a = milestone_times(stationary_state(100.0, pot, grid), pot, sigma=0.01)
        b = milestone_times(stationary_state(200.0, pot, grid), pot, sigma=0.02)
        assert math.isclose(b.z_sigma, 8.0 * a.z_sigma, rel_tol=1e-9)

    def test_shallow_potential_refused(self):
        pot = annulus_potential(8.0)
        grid = build_graded_grid(4.0, 8.0)
        rho0 = stationary_state(1.0, pot, grid)
        with pytest.raises(ValueError, match="gamma > 8"):
            milestone_times(rho0, pot)

    def test_bad_sigma_refused(self):
        pot = annulus_potential(16.0)
        grid = build_graded_grid(4.0, 16.0)
        rho0 = stationary_state(1.0, pot, grid)
        with pytest.raises(ValueError, match="sigma"):
            milestone_times(rho0, pot, sigma=1.5)


@pytest.fixture(scope="module")
def far_setup():
    gamma = 16.0
    pot = annulus_potential(gamma)
    grid = build_graded_grid(30.0, gamma)
    return gamma, pot, grid


class TestDecayBound:
    def test_envelope_fit(self, far_setup):
        gamma, pot, grid = far_setup
        h = pot.eval_H(grid.centers)
        f0 = profile_from_function(grid, lambda r: np.where(r <= 0.3, 2.0, 0.0))
        traj = dual_solve(f0, pot, 3.0, dt_max=0.01, frame_times=np.linspace(0, 3, 41))
        rho0 = RadialProfile(
            grid=grid, values=f0.values * np.exp(h), kind=ProfileKind.DENSITY
        )
        ms = milestone_times(
            rho0, pot, sigma=0.01, constants=MilestoneConstants(c_entry=0.05)
        )
        rep = verify_decay_bound(traj, ms)
        assert rep.z_monotone
        assert rep.frames_used >= 5
        assert 0.0 < rep.fitted_c < math.inf
        # envelope consistency: every counted frame obeys the fitted rate
        z, _ = traj.z_w_series()
        sup2 = float(np.max(f0.values)) ** 2
        for t, zt in zip(traj.times, z):
            if t <= ms.t1 or zt <= ms.z_sigma:
                continue
            bound = sup2 * (rep.fitted_c * gamma * (t - ms.t1)) ** (
                -(gamma - 8.0) / 8.0
            )
            assert zt <= bound * (1 + 1e-9)

    def test_sigma_floor_reached(self, far_setup):
        gamma, pot, grid = far_setup
        h = pot.eval_H(grid.centers)
        f0 = profile_from_function(grid, lambda r: np.where(r <= 0.3, 2.0, 0.0))
        traj = dual_solve(f0, pot, 3.0, dt_max=0.01, frame_times=np.linspace(0, 3, 41))
        rho0 = RadialProfile(
            grid=grid, values=f0.values * np.exp(h), kind=ProfileKind.DENSITY
        )
        ms = milestone_times(rho0, pot, sigma=0.01)
        rep = verify_decay_bound(traj, ms)
        assert rep.sigma_floor_time is not None
        assert rep.sigma_floor_time < 2.0


class TestSupBound:
    def test_flat_potential_reference(self):
        n = 480
        grid = build_graded_grid(12.0, 1.0, n_core=n, uniform=True)
        total, s = 3.0, 0.25
        rho0 = profile_from_function(
            grid, lambda r: total / (4 * math.pi * s) * np.exp(-(r**2) / (4 * s))
        )
        traj = fp_solve(rho0, np.zeros(grid.n_cells), 1.0, dt_max=0.004)
        rep = verify_linfty(traj)
        # exact value of sup(t) * t / mass peaks at t/(4 pi (t+s)) ~ 0.064
        assert 0.05 < rep.fitted_c < 0.08

    def test_forward_only(self, medium_setup):
        _, pot, grid = medium_setup
        f0 = profile_from_function(grid, lambda r: np.tanh(r))
        traj = dual_solve(f0, pot, 0.2, dt_max=0.05)
        with pytest.raises(ValueError, match="forward"):
            verify_linfty(traj)


class TestTransportFront:
    def test_front_spreads_at_drift_rate(self, far_setup):
        gamma, pot, grid = far_setup
        f0 = profile_from_function(grid, lambda r: np.where(r <= 1.0, 1.0, 0.0))
        traj = dual_solve(
            f0, pot, 5.0, dt_max=0.01, frame_times=np.linspace(0, 5, 26)
        )
        rep = transport_front(traj, gamma, levels=(0.5, 0.25), t_window=(0.5, 5.0))
        assert rep.station_min > 0.4
        assert 0.5 < rep.level_radii[0.25] < 1.2
        assert rep.level_stability[0.25] < 1.5
        assert rep.best_level in (0.5, 0.25)

    def test_dual_only(self, medium_setup):
        _, pot, grid = medium_setup
        rho0 = profile_from_function(grid, lambda r: np.exp(-(r**2)))
        traj = fp_solve(rho0, pot, 0.2, dt_max=0.05)
        with pytest.raises(ValueError, match="adjoint"):
            transport_front(traj, 16.0)


class TestThresholdSplit:
    def test_split_properties(self, medium_setup):
        _, pot, grid = medium_setup
        h = pot.eval_H(grid.centers)
        rng = np.random.default_rng(23)
        vals = rng.normal(scale=2.0, size=grid.n_cells) * np.exp(h)
        g = RadialProfile(grid=grid, values=vals, kind=ProfileKind.DENSITY)
        alpha = 0.3
        g1, g2, mask = threshold_decompose(g, pot, alpha)
        np.testing.assert_array_equal(g1.values + g2.values, vals)
        assert np.all(np.abs(g1.values) * np.exp(-h) <= 2 * alpha * (1 + 1e-12))
        nz = g2.values != 0
        assert np.all(np.abs(g2.values[nz]) * np.exp(-h[nz]) >= 2 * alpha * (1 - 1e-12))
        assert np.array_equal(mask, nz)

    def test_positive_alpha_required(self, medium_setup):
        _, pot, grid = medium_setup
        g = profile_from_function(grid, lambda r: np.exp(-r))
        with pytest.raises(ValueError, match="positive"):
            threshold_decompose(g, pot, 0.0)


class TestMassConcentration:
    def test_stationary_frame_passes(self):
        gamma = 40.0
        pot = annulus_potential(gamma)
        grid = build_graded_grid(8.0, gamma)
        total = 10.0
        frame = stationary_state(total, pot, grid)
        sigma = 1e-3
        z_floor = sigma * math.exp(-pot.plateau_value) * total**2
        rep = mass_in_ball_from_Z(frame, pot, 0.5, z_floor, sigma, 1.0, total)
        assert rep.precondition_met
        assert rep.deviation_mass < 1e-12
        assert rep.ball_mass > rep.ball_mass_floor
        assert rep.ok

    def test_ball_must_sit_in_plateau(self):
        pot = annulus_potential(40.0)
        grid = build_graded_grid(8.0, 40.0)
        frame = stationary_state(1.0, pot, grid)
        with pytest.raises(ValueError, match="plateau"):
            mass_in_ball_from_Z(frame, pot, 0.9, 1.0, 1e-3, 1.0, 1.0)


class TestFrameDump:
    def test_round_trip_files(self, tmp_path, medium_setup):
        _, pot, grid = medium_setup
        rho0 = profile_from_function(grid, lambda r: np.exp(-(r**2)))
        traj = fp_solve(rho0, pot, 0.2, dt_max=0.05, frame_times=np.linspace(0, 0.2, 3))
        out = write_frames(traj, tmp_path, tag="demo")
        csv_path = out / "demo_frames.csv"
        man_path = out / "demo_manifest.json"
        assert csv_path.exists() and man_path.exists()
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "t,r,value"
        assert len(lines) == 1 + 3 * grid.n_cells
        import json

        manifest = json.loads(man_path.read_text())
        assert manifest["frames"] == 3
        assert manifest["grid"]["n_cells"] == grid.n_cells
