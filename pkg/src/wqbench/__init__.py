"""Trustworthiness benchmarking for water-quality time-series models.

Subpackages
-----------
ndcore    reverse-mode autodiff engine on numpy arrays
models    recurrent, operator, and attention regressors plus training
dataio    ingestion, synthesis, splits, normalization
corrupt   outlier, noise, and adversarial corruption protocols
metrics   KGE, PBIAS, simplicity, Theil-Sen, LOWESS
stats     rank tests, effect sizes, FDR adjustment
trust     robustness, uncertainty, and attribution protocols
harness   experiment orchestration, reports, and the CLI
"""

__version__ = "0.1.0"
