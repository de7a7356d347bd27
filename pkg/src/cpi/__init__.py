"""Conditional predictive impact: knockoff-based conditional independence
tests for supervised learners."""
from ._kernels import BACKEND_NAME
from .data import (ConstantColumnError, DataError, Dataset, FeatureSubset, RngStream, Task,
                   ar1_cov, load_csv, standardize, write_csv)
from .engine import CpiError, compute_delta, cpi_deltas, run_cpi, run_cpi_many
from .inference import (FisherConfig, InferenceError, adjust, bh_adjust, fisher_exact_cpi,
                        holm_adjust, knockoff_filter_att, lasso_w_stats, loco, power_t,
                        t_test_cpi, wls_test_cpi)
from .knockoffs import (GaussianKnockoffModel, KnockoffError, fit_gaussian_knockoffs,
                        sample_knockoffs, substitute)
from .learners import Loss, make_learner
from .resampling import Holdout, KFold, Subsample, parse_risk
from .results import CpiTestResult, DeltaVector

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "ConstantColumnError",
    "CpiError",
    "CpiTestResult",
    "DataError",
    "Dataset",
    "DeltaVector",
    "FeatureSubset",
    "FisherConfig",
    "GaussianKnockoffModel",
    "Holdout",
    "InferenceError",
    "KFold",
    "KnockoffError",
    "Loss",
    "RngStream",
    "Subsample",
    "Task",
    "adjust",
    "ar1_cov",
    "bh_adjust",
    "compute_delta",
    "cpi_deltas",
    "fisher_exact_cpi",
    "fit_gaussian_knockoffs",
    "holm_adjust",
    "knockoff_filter_att",
    "lasso_w_stats",
    "load_csv",
    "loco",
    "make_learner",
    "parse_risk",
    "power_t",
    "run_cpi",
    "run_cpi_many",
    "sample_knockoffs",
    "standardize",
    "substitute",
    "t_test_cpi",
    "wls_test_cpi",
    "write_csv",
]
