"""rebalance: survey-style weighting for biased samples.

Diagnose covariate imbalance between a sample and a target population, fit
unit-level weights (post-stratification, raking, lasso-penalized inverse
propensity weighting, or covariate-balancing propensity scores), and
evaluate the result: balance tables, design effect and effective sample
size, and weighted outcome estimates with confidence intervals.
"""

__version__ = "0.1.0"

from .datasets import simulate_survey_data
from .design import (
    FormulaAST,
    ModelMatrix,
    TransformConfig,
    apply_transforms,
    build_model_matrix,
    parse_formula,
)
from .diagnostics import (
    AsmdTable,
    OutcomeReport,
    PlotSeries,
    WeightSummary,
    asmd,
    effective_sample_size,
    kish_deff,
    outcome_report,
    plot_data,
    weighted_mean,
    weighted_mean_ci,
    weighted_mean_variance,
    weights_summary,
)
from .estimators import (
    CbpsConfig,
    IpwConfig,
    RakeConfig,
    WeightResult,
    cbps,
    ipw,
    poststratify,
    rake,
    trim_weights,
)
from .io import load_csv
from .lasso import (
    Coefficients,
    CVResult,
    GlmProblem,
    cv_lambda_path,
    fit_logistic_lasso,
    predict_proba,
)
from .sample import (
    ColumnKind,
    PairedSample,
    Sample,
    WeightScale,
    WeightVector,
    build_sample,
    normalize_weights,
    pair_with_target,
)

__all__ = [
    "__version__",
    "AsmdTable",
    "CbpsConfig",
    "Coefficients",
    "ColumnKind",
    "CVResult",
    "FormulaAST",
    "GlmProblem",
    "IpwConfig",
    "ModelMatrix",
    "OutcomeReport",
    "PairedSample",
    "PlotSeries",
    "RakeConfig",
    "Sample",
    "TransformConfig",
    "WeightResult",
    "WeightScale",
    "WeightSummary",
    "WeightVector",
    "apply_transforms",
    "asmd",
    "build_model_matrix",
    "build_sample",
    "cbps",
    "cv_lambda_path",
    "effective_sample_size",
    "fit_logistic_lasso",
    "ipw",
    "kish_deff",
    "load_csv",
    "normalize_weights",
    "outcome_report",
    "pair_with_target",
    "parse_formula",
    "plot_data",
    "poststratify",
    "predict_proba",
    "rake",
    "simulate_survey_data",
    "trim_weights",
    "weighted_mean",
    "weighted_mean_ci",
    "weighted_mean_variance",
    "weights_summary",
]
