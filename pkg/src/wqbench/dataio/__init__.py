from .schema import (
    ATTRIBUTION_GROUPS,
    EPOCH,
    FILL_VALUE,
    TIME_FEATURES,
    BasinDataset,
    BasinRecord,
    classify_land_use,
    coverage,
    select_feature_columns,
    time_feature_matrix,
)
from .normalize import (
    LOGMINMAX,
    MINMAX,
    ColumnStats,
    NormStats,
    PreparedBasin,
    PreparedData,
    apply_normalizer,
    default_norm_methods,
    fit_normalizer,
    prepare,
)
from .splits import (
    PAPER_TEST_YEARS,
    SplitPlan,
    SplitResult,
    split,
)
from .synth import SynthConfig, SynthVariable, synthesize, synthesize_with_truth
from .csvio import ingest_csv, write_csv

__all__ = [
    "ATTRIBUTION_GROUPS",
    "EPOCH",
    "FILL_VALUE",
    "TIME_FEATURES",
    "BasinDataset",
    "BasinRecord",
    "classify_land_use",
    "coverage",
    "select_feature_columns",
    "LOGMINMAX",
    "MINMAX",
    "ColumnStats",
    "NormStats",
    "PreparedBasin",
    "PreparedData",
    "apply_normalizer",
    "default_norm_methods",
    "fit_normalizer",
    "prepare",
    "PAPER_TEST_YEARS",
    "SplitPlan",
    "SplitResult",
    "split",
    "SynthConfig",
    "SynthVariable",
    "synthesize",
    "synthesize_with_truth",
    "time_feature_matrix",
    "ingest_csv",
    "write_csv",
]
