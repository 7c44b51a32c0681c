"""High-dimensional quadratic discriminant analysis under class imbalance.

The package fits a two-shrinkage quadratic rule whose majority-class shrinkage
and additive bias are designed from random-matrix limits, predicts its error
rates without a holdout set, and ships the synthetic scenarios plus CSV
protocol used to benchmark it.
"""

from .discriminant import (
    RULE_IMPROVED_RQDA,
    RULE_RLDA,
    RULE_STANDARD_RQDA,
    RULE_TRUE_QDA,
    ErrorReport,
    Score,
    classify,
    classify_values,
    conditional_score_moments,
    empirical_error,
    improved_score,
    improved_scores,
    qda_score_true,
    qda_scores_true,
    rlda_score,
    rlda_scores,
    rqda_score,
    rqda_scores,
)
from .errors import (
    ConvergenceError,
    CsvFormatError,
    DegenerateDesignError,
    DegenerateEstimateError,
    HdqdaError,
    InsufficientSamplesError,
    InvalidRegularizerError,
    NotSpdError,
    StabilityError,
    TuningError,
)
from .estimation import (
    FittedStats,
    PooledStats,
    TrainingSet,
    fit,
    fit_pooled,
    regularized_resolvent,
    sample_moments,
)
from .gestim import (
    BiasEstimate,
    GEstimate,
    delta_hat,
    g_estimator_error,
    gamma1_hat,
    theta_hat,
)
from .ingestion import (
    LabeledDataset,
    SplitResult,
    load_csv,
    make_imbalanced_split,
)
from .model import (
    AssumptionReport,
    ClassStatistics,
    MixtureModel,
    ScenarioConfig,
    ScenarioData,
    build_mixture,
    make_spiked_covariance,
    sample_class,
    sample_scenario,
    stream,
    validate_assumptions,
)
from .pipeline import (
    ImprovedModel,
    TuningEntry,
    TuningResult,
    default_grid,
    fit_improved,
    tune_gamma0,
)
from .rmt import (
    AsymptoticPrediction,
    DeterministicEquivalents,
    ThetaDesign,
    asymptotic_error,
    eigen_delta_solver,
    gamma1_theoretical,
    solve_delta,
    theta_star_theoretical,
)

__all__ = [
    "AssumptionReport",
    "AsymptoticPrediction",
    "BiasEstimate",
    "ClassStatistics",
    "ConvergenceError",
    "CsvFormatError",
    "DegenerateDesignError",
    "DegenerateEstimateError",
    "DeterministicEquivalents",
    "ErrorReport",
    "FittedStats",
    "GEstimate",
    "HdqdaError",
    "ImprovedModel",
    "InsufficientSamplesError",
    "InvalidRegularizerError",
    "LabeledDataset",
    "MixtureModel",
    "NotSpdError",
    "PooledStats",
    "RULE_IMPROVED_RQDA",
    "RULE_RLDA",
    "RULE_STANDARD_RQDA",
    "RULE_TRUE_QDA",
    "ScenarioConfig",
    "ScenarioData",
    "Score",
    "SplitResult",
    "StabilityError",
    "ThetaDesign",
    "TrainingSet",
    "TuningEntry",
    "TuningError",
    "TuningResult",
    "asymptotic_error",
    "classify",
    "classify_values",
    "conditional_score_moments",
    "default_grid",
    "delta_hat",
    "empirical_error",
    "eigen_delta_solver",
    "fit",
    "fit_improved",
    "fit_pooled",
    "g_estimator_error",
    "gamma1_hat",
    "gamma1_theoretical",
    "improved_score",
    "improved_scores",
    "load_csv",
    "make_imbalanced_split",
    "make_spiked_covariance",
    "qda_score_true",
    "qda_scores_true",
    "regularized_resolvent",
    "rlda_score",
    "rlda_scores",
    "rqda_score",
    "rqda_scores",
    "sample_class",
    "sample_moments",
    "sample_scenario",
    "solve_delta",
    "stream",
    "build_mixture",
    "theta_hat",
    "theta_star_theoretical",
    "tune_gamma0",
    "validate_assumptions",
]
