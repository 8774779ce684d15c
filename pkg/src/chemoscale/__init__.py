"""Radial chemotaxis-and-consumption toolkit.

A mobile density drifts up the potential induced by a consumable target while
eating it; the package simulates that coupled pair, the linear drift-diffusion
flows it is compared against, and the weighted variance inequalities and
scaling laws that control how fast the target is depleted.  Everything is
radially symmetric and runs on one graded finite-volume grid family.

The submodules are usable on their own; this namespace re-exports the pieces
that most workflows touch.
"""
from __future__ import annotations

from .acceptance import CRITERION_IDS, CriterionResult, run_all, run_criterion
from .fokker_planck import (
    FPTrajectory,
    TransportOperator,
    dual_solve,
    duality_invariant,
    fp_solve,
    stationary_state,
    transport_front,
    verify_linfty,
)
from .grid import (
    ProfileKind,
    RadialGrid,
    RadialProfile,
    build_graded_grid,
    profile_from_function,
)
from .harness import (
    RunRecord,
    ScalingFit,
    SweepConfig,
    fit_scaling,
    run_point,
    run_sweep,
)
from .poincare import (
    ModeProfile,
    battery_report,
    best_constant,
    standard_battery,
    verify_block_inequalities,
    verify_combined,
    verify_power_weight,
    verify_truncated,
)
from .potential import (
    AnnulusPotential,
    WeightSpec,
    annulus_potential,
    ground_state_weight,
    inverse_laplacian_radial,
    power_law_weight,
)
from .reaction import (
    CoupledTrajectory,
    Params,
    coupled_solve,
    diffusion_baseline_solve,
    half_time,
    initial_shell,
    initial_target,
    tau_d_lower_bound,
    verify_mass_comparison,
    verify_pass_through,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # grids and profiles
    "ProfileKind",
    "RadialGrid",
    "RadialProfile",
    "build_graded_grid",
    "profile_from_function",
    # potentials and weights
    "AnnulusPotential",
    "WeightSpec",
    "annulus_potential",
    "ground_state_weight",
    "inverse_laplacian_radial",
    "power_law_weight",
    # linear transport flows
    "FPTrajectory",
    "TransportOperator",
    "fp_solve",
    "dual_solve",
    "stationary_state",
    "duality_invariant",
    "verify_linfty",
    "transport_front",
    # variance-vs-energy workbench
    "ModeProfile",
    "standard_battery",
    "battery_report",
    "best_constant",
    "verify_block_inequalities",
    "verify_combined",
    "verify_truncated",
    "verify_power_weight",
    # coupled reaction runs
    "Params",
    "CoupledTrajectory",
    "coupled_solve",
    "diffusion_baseline_solve",
    "initial_shell",
    "initial_target",
    "half_time",
    "tau_d_lower_bound",
    "verify_mass_comparison",
    "verify_pass_through",
    # sweeps and verification
    "SweepConfig",
    "RunRecord",
    "ScalingFit",
    "run_point",
    "run_sweep",
    "fit_scaling",
    "CRITERION_IDS",
    "CriterionResult",
    "run_criterion",
    "run_all",
]
