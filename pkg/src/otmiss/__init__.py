"""Optimal transport from data with missing values.

Estimates Bures-Wasserstein distances, linear Monge maps, and exact/entropic
discrete OT from zero-imputed datasets, either by inverse-probability
debiasing of the moments or by low-rank matrix completion, plus a CLI harness
for the accompanying experiments.
"""

__version__ = "0.1.0"

from .data import (
    Mask,
    MaskedDataset,
    ScalingParams,
    apply_mask_zero_impute,
    complete_case_filter,
    estimate_missingness,
    generate_mcar_mask,
    generate_mnar_mask,
    minmax_scale,
)
from .moments import (
    GaussianSummary,
    MomentDiagnostics,
    debiased_covariance,
    debiased_mean,
    effective_rank,
    empirical_summary,
    forward_masked_covariance,
    imputed_covariance,
    imputed_mean,
)
from .gaussian import (
    AffineMap,
    BwReport,
    bures_wasserstein,
    debiased_bw,
    debiased_monge_map,
    debiased_summary,
    entropic_gaussian_ot,
    linear_monge_map,
    na_bias_lower_bound,
    psd_sqrt,
)
from .discrete import (
    CostMatrix,
    Coupling,
    OtSolution,
    cost_matrix,
    coupling_kl,
    implicit_cost,
    sensitivity_constants,
    sinkhorn,
    solve_exact_ot,
)
from .completion import CompletionResult, isvt, soft_impute, soft_threshold_svd
from .selection import (
    SelectionConfig,
    SelectionReport,
    bw_score,
    cross_bw_score,
    default_lambda_grid,
    frobenius_cv_score,
    select,
)
from .pipelines import (
    LinearClassifier,
    TwoStepResult,
    train_logistic,
    two_step_entropic_ot,
)
