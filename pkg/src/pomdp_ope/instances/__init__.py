"""Concrete environments: the small benchmark POMDP, the blood-glucose
mobile-health simulator, and the worst-case ladder instance family."""

from .glucose import (
    GlucoseState,
    GlucoseTrajectory,
    glucose_rewards_and_ratios,
    glucose_simulate,
    glucose_trajectory_to_csv,
    target_value_oracle,
    utility_from_glucose,
)
from .hard import (
    ConditionReport,
    HardInstanceParams,
    check_conditions,
    hard_instance_pair,
    kl_bound,
    params_from_mixing_time,
    theorem2_design,
    top_state_occupancy,
)
from .toy import toy_model

__all__ = [
    "ConditionReport",
    "GlucoseState",
    "GlucoseTrajectory",
    "HardInstanceParams",
    "check_conditions",
    "glucose_rewards_and_ratios",
    "glucose_simulate",
    "glucose_trajectory_to_csv",
    "hard_instance_pair",
    "kl_bound",
    "params_from_mixing_time",
    "target_value_oracle",
    "theorem2_design",
    "top_state_occupancy",
    "toy_model",
    "utility_from_glucose",
]
