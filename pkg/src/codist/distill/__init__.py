"""Distillation toolkit: losses, rank-aware sampling, selection, training."""

from .config import DistillConfig, VARIANTS, variant_config
from .losses import (
    LossError,
    cf_loss_cd,
    kd_loss_cd,
    kd_loss_rd,
    pointwise_bce_loss,
    sigmoid,
    tempered_logistic,
    total_loss_cd,
    total_loss_rd,
)
from .sampling import (
    RankedItems,
    acceptance_frequencies,
    exponential_weights,
    linear_weights,
    rank_items,
    rank_unrated,
    sample_exponential,
    sample_linear,
    sample_random,
    sample_top_k,
)
from .tactics import SoftTargetSelector
from .training import (
    TrainingError,
    TrainResult,
    merge_item_grads,
    negative_count,
    stream_rng,
    train_student,
    train_teacher,
)

__all__ = [
    "DistillConfig", "VARIANTS", "variant_config",
    "LossError", "cf_loss_cd", "kd_loss_cd", "kd_loss_rd",
    "pointwise_bce_loss", "sigmoid", "tempered_logistic",
    "total_loss_cd", "total_loss_rd",
    "RankedItems", "acceptance_frequencies", "exponential_weights",
    "linear_weights", "rank_items", "rank_unrated", "sample_exponential",
    "sample_linear", "sample_random", "sample_top_k",
    "SoftTargetSelector",
    "TrainingError", "TrainResult", "merge_item_grads", "negative_count",
    "stream_rng", "train_student", "train_teacher",
]
