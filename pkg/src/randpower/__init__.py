"""Restricted randomization designs for two-arm experiments and the power
of the randomization test, computed three ways: empirical simulation, a
finite-R integral formula, and the asymptotic (R -> infinity) formula."""

from randpower.alloc import (
    allocation_stats,
    correlation,
    imbalance,
    make_allocation,
    mirror,
    normal_quantile_covariate,
)
from randpower.designs import (
    DesignSet,
    RerandThreshold,
    best_design,
    calibrate_threshold,
    design_from_csv,
    design_to_csv,
    greedy_pair_switch,
    sample_bcrd,
    sample_matching,
    sample_rerandomization,
)
from randpower.randtest import (
    ExperimentScenario,
    PowerResult,
    empirical_power,
    estimate_effect,
    estimate_matrix,
    generate_response,
    power_metric,
    randomization_reject,
)
from randpower.theory import (
    QuadratureSpec,
    TheoryParams,
    asymptotic_power,
    density_fT,
    finite_power,
    finite_power_with_se,
    p_of_us,
    power_se,
    solve_qz,
    solve_uat,
    toy_power_r2,
)
from randpower.sim import GridSpec, desk_grid, paper_grid, run_grid, run_theory_grid
from randpower.charts import emit_charts

__all__ = [
    "allocation_stats",
    "correlation",
    "imbalance",
    "make_allocation",
    "mirror",
    "normal_quantile_covariate",
    "DesignSet",
    "RerandThreshold",
    "best_design",
    "calibrate_threshold",
    "design_from_csv",
    "design_to_csv",
    "greedy_pair_switch",
    "sample_bcrd",
    "sample_matching",
    "sample_rerandomization",
    "ExperimentScenario",
    "PowerResult",
    "empirical_power",
    "estimate_effect",
    "estimate_matrix",
    "generate_response",
    "power_metric",
    "randomization_reject",
    "QuadratureSpec",
    "TheoryParams",
    "asymptotic_power",
    "density_fT",
    "finite_power",
    "finite_power_with_se",
    "p_of_us",
    "power_se",
    "solve_qz",
    "solve_uat",
    "toy_power_r2",
    "GridSpec",
    "desk_grid",
    "paper_grid",
    "run_grid",
    "run_theory_grid",
    "emit_charts",
]

__version__ = "0.1.0"
