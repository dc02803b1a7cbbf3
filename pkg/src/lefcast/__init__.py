"""Label-efficient exponentially weighted forecasting with expert advice."""

__version__ = "0.1.0"

from .environments import (
    GapEnv,
    GapEnvConfig,
    Round,
    ScriptedEnv,
    ThresholdEnv,
    ThresholdEnvConfig,
    enumerate_adversarial,
    gap_round,
    noise_curve,
    optimal_risk,
    threshold_risk,
    threshold_round,
)
from .forecaster import (
    BOOSTED_MAJORITY,
    FOLLOW_MAJORITY,
    FULL_INFORMATION,
    QSTAR_EXACT,
    QSTAR_UPPER,
    ForecasterState,
    RoundRecord,
    SamplingStrategy,
    StrategyKind,
    init_state,
    prediction_probability,
    query_probability,
    step,
    weighted_agreement,
)
from .harness import (
    ExperimentConfig,
    MetricsSeries,
    RunTrace,
    auto_eta,
    ci_halfwidth,
    label_complexity_bound,
    loglog_slope,
    run_experiment,
    run_once,
)
from .oracle import (
    ExactResult,
    SweepReport,
    exact_general,
    exact_majority,
    general_bound,
    majority_bound,
    sweep_general,
    sweep_majority,
)
from .qstar import constraint_values, q_star, q_star_curve, q_star_upper

__all__ = [
    "__version__",
    "BOOSTED_MAJORITY",
    "FOLLOW_MAJORITY",
    "FULL_INFORMATION",
    "QSTAR_EXACT",
    "QSTAR_UPPER",
    "ExactResult",
    "ExperimentConfig",
    "ForecasterState",
    "GapEnv",
    "GapEnvConfig",
    "MetricsSeries",
    "Round",
    "RoundRecord",
    "RunTrace",
    "SamplingStrategy",
    "ScriptedEnv",
    "StrategyKind",
    "SweepReport",
    "ThresholdEnv",
    "ThresholdEnvConfig",
    "auto_eta",
    "ci_halfwidth",
    "constraint_values",
    "enumerate_adversarial",
    "exact_general",
    "exact_majority",
    "gap_round",
    "general_bound",
    "init_state",
    "label_complexity_bound",
    "loglog_slope",
    "majority_bound",
    "noise_curve",
    "optimal_risk",
    "prediction_probability",
    "q_star",
    "q_star_curve",
    "q_star_upper",
    "query_probability",
    "run_experiment",
    "run_once",
    "step",
    "sweep_general",
    "sweep_majority",
    "threshold_risk",
    "threshold_round",
    "weighted_agreement",
]
