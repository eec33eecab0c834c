from .evaluate import (
    evaluate_model,
    median_kge_by_variable,
    prediction_pairs,
    restrict_features,
    train_family,
)
from .robustness import (
    RobustnessCurve,
    build_robustness_curve,
    corrupt_training_dataset,
    robustness_sweep,
)
from .uncertainty import (
    UncertaintyResult,
    mc_dropout_uncertainty,
    tta_uncertainty,
)
from .attribution import (
    AttributionResult,
    ablation_importance,
    aggregate_ablation,
    aggregate_traverse,
    default_baseline,
    ig_completeness,
    ig_group_aggregate,
    integrated_gradients,
    normalized_shares,
    traverse_importance,
)

__all__ = [
    "evaluate_model",
    "median_kge_by_variable",
    "prediction_pairs",
    "restrict_features",
    "train_family",
    "RobustnessCurve",
    "build_robustness_curve",
    "corrupt_training_dataset",
    "robustness_sweep",
    "UncertaintyResult",
    "mc_dropout_uncertainty",
    "tta_uncertainty",
    "AttributionResult",
    "ablation_importance",
    "aggregate_ablation",
    "aggregate_traverse",
    "default_baseline",
    "ig_completeness",
    "ig_group_aggregate",
    "integrated_gradients",
    "normalized_shares",
    "traverse_importance",
]
