from .spec import (
    ATTENTION,
    OPERATOR,
    RECURRENT,
    CosineSchedule,
    ModelSpec,
    StepSchedule,
    TrainConfig,
)
from .build import TrainedModel, build, layout, parameter_count
from .recurrent import forward_recurrent
from .operator import forward_operator
from .attention import forward_attention
from .training import (
    SampleBatch,
    TrainResult,
    assemble_batch,
    forward_batch,
    masked_mse,
    perturbable_keys,
    predict_rows,
    sample_index,
    train_model,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ATTENTION",
    "OPERATOR",
    "RECURRENT",
    "CosineSchedule",
    "ModelSpec",
    "StepSchedule",
    "TrainConfig",
    "parameter_count",
    "TrainedModel",
    "build",
    "layout",
    "forward_recurrent",
    "forward_operator",
    "forward_attention",
    "SampleBatch",
    "TrainResult",
    "assemble_batch",
    "forward_batch",
    "masked_mse",
    "perturbable_keys",
    "predict_rows",
    "sample_index",
    "train_model",
    "load_checkpoint",
    "save_checkpoint",
]
