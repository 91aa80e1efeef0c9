"""Direction estimation for monotone single-index models observed through
response ranks, with resampling inference, Monte Carlo scenarios, and a
numerical verification suite. See the README for the model and usage."""

__version__ = "0.1.0"

from ._validation import DataError, NumericalError
from .ranks import (
    RankedResponse,
    empirical_cdf,
    grouped_rank_transform,
    hstar_transform,
    rank_vector,
)
from .gaussian import (
    TruncationSpec,
    quantile_slope_bound,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    truncated_quantile,
    truncation_level,
)
from .estimators import (
    ESTIMATORS,
    EmpiricalQuantileRegressor,
    GaussianQuantileRegressor,
    ModelTruth,
    OrdinaryLeastSquares,
    SpearmaxRegressor,
    TruncatedGaussianQuantileRegressor,
    direction_angle,
    dispersion_matrix,
    least_squares,
    make_estimator,
    normalize_direction,
    sigma_star,
    spearman_objective,
)
from .inference import (
    ADResult,
    IntervalEstimate,
    anderson_darling_normality,
    bootstrap_angle_ci,
    bootstrap_ci,
    jackknife_angles,
    jackknife_normal_ci,
    jackknife_variance,
    percentile_indices,
    percentile_jackknife_ci,
    studentized_ci,
    unwrap_angles,
)
from .simulate import (
    CovariateDist,
    ErrorDist,
    ScenarioConfig,
    StableParams,
    TrialRecord,
    TrialSummary,
    load_scenario_config,
    preset_scenarios,
    run_scenario,
    sample_mvn,
    sample_stable,
    summarize_trials,
    write_summary_csv,
)
from .verify import (
    CheckReport,
    check_clt,
    check_lemma1,
    check_lemma4,
    check_lemma10,
    check_slope_identity,
    default_truth,
    run_all_checks,
)

__all__ = [
    "__version__",
    "DataError",
    "NumericalError",
    "RankedResponse",
    "rank_vector",
    "hstar_transform",
    "empirical_cdf",
    "grouped_rank_transform",
    "TruncationSpec",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "truncation_level",
    "truncated_quantile",
    "quantile_slope_bound",
    "ModelTruth",
    "sigma_star",
    "dispersion_matrix",
    "least_squares",
    "normalize_direction",
    "direction_angle",
    "spearman_objective",
    "GaussianQuantileRegressor",
    "TruncatedGaussianQuantileRegressor",
    "EmpiricalQuantileRegressor",
    "SpearmaxRegressor",
    "OrdinaryLeastSquares",
    "ESTIMATORS",
    "make_estimator",
    "IntervalEstimate",
    "ADResult",
    "unwrap_angles",
    "bootstrap_ci",
    "bootstrap_angle_ci",
    "jackknife_angles",
    "jackknife_variance",
    "jackknife_normal_ci",
    "percentile_jackknife_ci",
    "percentile_indices",
    "studentized_ci",
    "anderson_darling_normality",
    "StableParams",
    "CovariateDist",
    "ErrorDist",
    "ScenarioConfig",
    "TrialRecord",
    "TrialSummary",
    "sample_mvn",
    "sample_stable",
    "run_scenario",
    "summarize_trials",
    "preset_scenarios",
    "load_scenario_config",
    "write_summary_csv",
    "CheckReport",
    "default_truth",
    "check_lemma1",
    "check_lemma4",
    "check_lemma10",
    "check_slope_identity",
    "check_clt",
    "run_all_checks",
]
