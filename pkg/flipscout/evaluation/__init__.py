"""Prediction scoring, cross-validation and model-comparison studies."""

from flipscout.evaluation.crossval import (
    CvResult,
    FoldPlan,
    ModelKind,
    accuracy_vs_block_distance,
    accuracy_vs_subset_size,
    accuracy_vs_test_length,
    cross_validate,
    fit_model,
    predict_panel,
)
from flipscout.evaluation.metrics import (
    PredictionRun,
    RocResult,
    accuracy_at,
    confusion_at,
    daily_accuracy_distribution,
    kl_divergence,
    roc,
)
from flipscout.evaluation.studies import (
    artificial_benchmark,
    ideal_accuracy,
    multi_information_fraction,
    noise_ratio_study,
    reconstruction_error,
    reversal_count_distributions,
    reversal_group_study,
    sign_cross_correlation,
)

__all__ = [
    "CvResult",
    "FoldPlan",
    "ModelKind",
    "PredictionRun",
    "RocResult",
    "accuracy_at",
    "accuracy_vs_block_distance",
    "accuracy_vs_subset_size",
    "accuracy_vs_test_length",
    "artificial_benchmark",
    "confusion_at",
    "cross_validate",
    "daily_accuracy_distribution",
    "fit_model",
    "ideal_accuracy",
    "kl_divergence",
    "multi_information_fraction",
    "noise_ratio_study",
    "predict_panel",
    "reconstruction_error",
    "reversal_count_distributions",
    "reversal_group_study",
    "roc",
    "sign_cross_correlation",
]
