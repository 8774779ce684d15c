"""Parameter sweep and power-law fits for the half-time.

Two small sweeps, sharing the mass constraint M0 * eps / gamma = 10:

* separation axis: L in {5, 10, 20} at steepness 64, where the coupled
  half-time should scale like L^2 (log-log slope near 2);
* steepness axis: gamma in {32, 64, 128} at L = 10, where it should scale
  like 1/gamma (slope near -1).

Each sweep writes runs.csv and config.json into demos/output/, and the
separation fit is rendered to a small self-contained SVG.

Runtime: under ten seconds.
"""
from __future__ import annotations

from pathlib import Path

from chemoscale import SweepConfig, fit_scaling, run_sweep
from chemoscale.harness import emit_svg

OUT = Path(__file__).resolve().parent / "output"


def show(records):
    print("  run    L    gamma    tau_C     tau_D    tau_D ref    status")
    for r in records:
        print(
            f"  {r.run_id}  {r.L:4g}  {r.gamma:5g}   {r.tau_C:7.4f}  {r.tau_D:8.4f}"
            f"  {r.tau_D_lb:8.4f}     {r.status}"
        )


cfg_L = SweepConfig(
    L_values=(5.0, 10.0, 20.0),
    gamma_values=(64.0,),
    eps_values=(0.1,),
    mass_eps_over_gamma=10.0,
)
recs_L = run_sweep(cfg_L, out_dir=OUT / "sweep_L")
print("separation sweep (steepness fixed at 64):")
show(recs_L)

fit = fit_scaling(recs_L, "tau_C", axis="L")
print(
    f"\nfit tau_C ~ L^p: p = {fit.slope:.3f} (target 2), "
    f"r^2 = {fit.r_squared:.5f} on {fit.n_points} points"
)
svg = emit_svg(fit, OUT / "tau_c_vs_L.svg", [(r.L, r.tau_C) for r in recs_L])
print(f"wrote {svg}")

cfg_g = SweepConfig(
    L_values=(10.0,),
    gamma_values=(32.0, 64.0, 128.0),
    eps_values=(0.1,),
    mass_eps_over_gamma=10.0,
)
recs_g = run_sweep(cfg_g, out_dir=OUT / "sweep_gamma")
print("\nsteepness sweep (separation fixed at 10):")
show(recs_g)

fit_g = fit_scaling(recs_g, "tau_C", axis="gamma")
print(
    f"\nfit tau_C ~ gamma^p: p = {fit_g.slope:.3f} (target -1), "
    f"r^2 = {fit_g.r_squared:.5f} on {fit_g.n_points} points"
)

print("\nspeedup over the diffusion baseline, row by row:")
for r in recs_L + recs_g:
    if r.status == "ok":
        print(f"  L = {r.L:4g}, gamma = {r.gamma:5g}: tau_D / tau_C = {r.tau_D / r.tau_C:6.1f}x")
