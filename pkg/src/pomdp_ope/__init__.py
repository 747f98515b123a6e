"""Off-policy evaluation in finite partially observed Markov decision
processes.

The package simulates finite POMDPs under a logged randomized policy,
estimates the long-run value of a different target policy by partial-history
importance weighting, quantifies uncertainty with a kernel-weighted long-run
variance estimator, selects the history window adaptively by interval
intersection, and reproduces the associated Monte Carlo error studies with
fully seeded, worker-count-independent sweeps.
"""

from .core import (
    Gaussian,
    MixingOverlapReport,
    PointMass,
    Policy,
    PomdpModel,
    Trajectory,
    dobrushin_coefficient,
    mixing_overlap_report,
    policy_transition_matrix,
    policy_value_exact,
    simulate,
    simulate_batch,
    stationary_distribution,
)
from .errors import ConfigurationError, MixingFailureError, OverlapViolationError
from .estimators import (
    BandwidthRule,
    EstimateReport,
    EstimatorConfig,
    LepskiResult,
    corollary_window,
    estimate_with_ci,
    estimate_with_ci_from_ratios,
    hac_variance,
    hac_variance_from_ratios,
    importance_ratios,
    lepski_select,
    lepski_select_from_ratios,
    parzen_kernel,
    phiw_estimate,
    phiw_estimate_from_ratios,
    select_window_from_intervals,
    weighted_terms,
    window_weights,
)
from .harness import (
    LepskiStudyResult,
    RateFit,
    SweepResult,
    SweepSpec,
    fit_rate,
    make_environment,
    run_lepski_study,
    run_sweep,
    sweep_result_to_csv,
    sweep_result_to_json,
)
from .rng import derive_seed, make_rng

__version__ = "0.1.0"

__all__ = [
    "BandwidthRule",
    "ConfigurationError",
    "EstimateReport",
    "EstimatorConfig",
    "Gaussian",
    "LepskiResult",
    "LepskiStudyResult",
    "MixingFailureError",
    "MixingOverlapReport",
    "OverlapViolationError",
    "PointMass",
    "Policy",
    "PomdpModel",
    "RateFit",
    "SweepResult",
    "SweepSpec",
    "Trajectory",
    "corollary_window",
    "derive_seed",
    "dobrushin_coefficient",
    "estimate_with_ci",
    "estimate_with_ci_from_ratios",
    "fit_rate",
    "hac_variance",
    "hac_variance_from_ratios",
    "importance_ratios",
    "lepski_select",
    "lepski_select_from_ratios",
    "make_environment",
    "make_rng",
    "mixing_overlap_report",
    "parzen_kernel",
    "phiw_estimate",
    "phiw_estimate_from_ratios",
    "policy_transition_matrix",
    "policy_value_exact",
    "run_lepski_study",
    "run_sweep",
    "select_window_from_intervals",
    "simulate",
    "simulate_batch",
    "stationary_distribution",
    "sweep_result_to_csv",
    "sweep_result_to_json",
    "weighted_terms",
    "window_weights",
]
