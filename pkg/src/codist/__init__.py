"""Top-N recommendation distillation toolkit.

Train a large teacher recommender, then compress it into a small
student that learns from both the training data and the teacher's
tempered predictions over sampled unrated items.  Ships two model
families (logistic MF and a denoising autoencoder), rank-aware
soft-target sampling, leave-one-out evaluation, and a CLI.
"""

from ._core import BACKEND
from .config import ConfigError, ModelConfig, RunConfig, TrainParams, load_config
from .data import (
    DatasetError,
    DatasetFormatError,
    EmptyDatasetError,
    InteractionDataset,
    SplitDataset,
    filter_dataset,
    leave_one_out_split,
    load_dataset,
)
from .distill import (
    VARIANTS,
    DistillConfig,
    SoftTargetSelector,
    TrainingError,
    TrainResult,
    variant_config,
    train_student,
    train_teacher,
)
from .evaluation import (
    EvalReport,
    EvaluationError,
    bench_latency,
    evaluate,
    oracle_evaluate,
)
from .manifest import ManifestError, RunManifest, replay
from .models import (
    CDAEModel,
    MFModel,
    ModelError,
    Optimizer,
    OptimizerConfig,
    OptimizerError,
    load_checkpoint,
    new_model,
    params_equal,
    save_checkpoint,
)
from .synthetic import synthetic_blocks

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "__version__",
    "ConfigError", "ModelConfig", "RunConfig", "TrainParams", "load_config",
    "DatasetError", "DatasetFormatError", "EmptyDatasetError",
    "InteractionDataset", "SplitDataset", "filter_dataset",
    "leave_one_out_split", "load_dataset",
    "VARIANTS", "DistillConfig", "SoftTargetSelector", "TrainingError",
    "TrainResult", "variant_config", "train_student", "train_teacher",
    "EvalReport", "EvaluationError", "bench_latency", "evaluate",
    "oracle_evaluate",
    "ManifestError", "RunManifest", "replay",
    "CDAEModel", "MFModel", "ModelError", "Optimizer", "OptimizerConfig",
    "OptimizerError", "load_checkpoint", "new_model", "params_equal",
    "save_checkpoint",
    "synthetic_blocks",
]
