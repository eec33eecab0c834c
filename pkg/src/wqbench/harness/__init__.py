from .config import (
    ExperimentConfig,
    PROTOCOLS,
    load_config,
    validate_config,
)
from .report import (
    EvaluationReport,
    build_figures,
    emit,
    load_report,
    render_json,
)
from .runner import run
from .seeding import seed_stream

__all__ = [
    "ExperimentConfig",
    "PROTOCOLS",
    "load_config",
    "validate_config",
    "EvaluationReport",
    "build_figures",
    "emit",
    "load_report",
    "render_json",
    "run",
    "seed_stream",
]
