# Heads module
from src.heads.accounting import (
    ParameterCount,
    count_shared,
    count_updateable,
    parameter_table,
    rmus,
)
from src.heads.linear import (
    LinearHead,
    linear_forward,
    linear_loss,
    load_linear_head,
    save_linear_head,
)
from src.heads.naive_bayes import (
    ClassifierCache,
    build_cache,
    class_logits,
    compress_lda,
    head_parameter_count,
    load_cache,
    predict_labels,
    predict_log_joint,
    predict_log_probs,
    restrict_cache,
    save_cache,
)
from src.heads.statistics import (
    CovarianceWeights,
    HeadStatistics,
    HeadVariant,
    estimate_stats,
    load_covariance_weights,
    mix_covariance,
    save_covariance_weights,
)

__all__ = [
    "ClassifierCache",
    "CovarianceWeights",
    "HeadStatistics",
    "HeadVariant",
    "LinearHead",
    "ParameterCount",
    "build_cache",
    "class_logits",
    "compress_lda",
    "count_shared",
    "count_updateable",
    "estimate_stats",
    "head_parameter_count",
    "linear_forward",
    "linear_loss",
    "load_cache",
    "load_covariance_weights",
    "load_linear_head",
    "mix_covariance",
    "parameter_table",
    "predict_labels",
    "predict_log_joint",
    "predict_log_probs",
    "restrict_cache",
    "rmus",
    "save_cache",
    "save_covariance_weights",
    "save_linear_head",
]
