"""Penalized Cox regression for high-dimensional right-censored data.

Lasso and adaptive-lasso solvers (ridge, PCA, univariate and random-survival-
forest weights), cross-validated partial likelihood, concordance metrics, a
censoring-calibrated survival-data simulator, and a multi-partition
best-model selection procedure.
"""

from .coxph import (CoxFit, IllPosedError, NumericError, RiskSetIndex,
                    gradient, hazard_ratios, hessian, log_partial_likelihood,
                    newton_fit, risk_scores)
from .crossval import CvResult, cv_path, cv_ridge_lambda
from .data import (DataError, Partition, Standardization, SurvivalDataset,
                   load_csv, save_csv, split, standardize)
from .estimators import CoxAdaptiveLasso, CoxLasso, check_survival_y
from .metrics import (KaplanMeier, SelectionMetrics, UndefinedMetricError,
                      cpe_k_index, harrell_c, kaplan_meier, km_censoring,
                      selection_metrics, uno_c)
from .penalized import (PathResult, PenaltyConfig, fit_l1, fit_path,
                        lambda_max, soft_threshold)
from .rsf import (Forest, ForestConfig, VimpResult, grow_forest,
                  predict_cumulative_hazard, predict_mortality, vimp)
from .selection import (SelectionRun, importance_index, importance_ranking,
                        power_index, run_selection, top_k_count)
from .simulate import (CovarianceSpec, SimulatedDataset, SimulationConfig,
                       WeibullFit, calibrate_censoring, fit_weibull_mle,
                       generate, make_covariance, sample_survival_times)
from .weights import (WeightVector, compute_weights, pca_weights,
                      ridge_weights, rsf_weights, select_gamma, uni_weights,
                      unit_weights)

__version__ = "0.1.0"

__all__ = [
    "CoxAdaptiveLasso", "CoxFit", "CoxLasso", "CovarianceSpec", "CvResult",
    "DataError", "Forest", "ForestConfig", "IllPosedError", "KaplanMeier",
    "NumericError", "Partition", "PathResult", "PenaltyConfig", "RiskSetIndex",
    "SelectionMetrics", "SelectionRun", "SimulatedDataset", "SimulationConfig",
    "Standardization", "SurvivalDataset", "UndefinedMetricError", "VimpResult",
    "WeibullFit", "WeightVector", "calibrate_censoring", "check_survival_y",
    "compute_weights", "cpe_k_index", "cv_path", "cv_ridge_lambda",
    "fit_l1", "fit_path", "fit_weibull_mle", "generate", "gradient",
    "grow_forest", "harrell_c", "hazard_ratios", "hessian",
    "importance_index", "importance_ranking", "kaplan_meier", "km_censoring",
    "lambda_max", "load_csv", "log_partial_likelihood", "make_covariance",
    "newton_fit", "pca_weights", "power_index", "predict_cumulative_hazard",
    "predict_mortality", "ridge_weights", "risk_scores", "rsf_weights",
    "run_selection", "sample_survival_times", "save_csv", "selection_metrics",
    "select_gamma", "soft_threshold", "split", "standardize", "top_k_count",
    "uni_weights", "unit_weights", "uno_c", "vimp",
]
