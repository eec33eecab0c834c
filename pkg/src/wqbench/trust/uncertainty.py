"""Prediction uncertainty: test-time augmentation and MC dropout.

Both methods repeat inference n_runs times and summarize each
(basin, variable) pair by the sample standard deviation (ddof=1) of its
KGE across runs.  TTA perturbs normalized inputs with Gaussian noise on
a chosen feature scope; MC dropout keeps dropout active at inference and
samples a fresh subnetwork per run.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .evaluate import evaluate_model

TTA = "tta"
MC_DROPOUT = "mc_dropout"

RUNOFF_ONLY = "runoff_only"
ALL_DYNAMIC = "all_dynamic"


@dataclass(frozen=True)
class UncertaintyResult:
    method: str
    runs: int
    sd: dict  # (basin id, variable name) -> SD of KGE across runs
    mean_kge: dict  # same keys -> mean KGE across runs


def _collect(method, runs_scores, n_runs):
    pairs = set()
    for scores in runs_scores:
        pairs.update(scores)
    sd = {}
    mean = {}
    for pair in sorted(pairs):
        values = [s[pair].kge for s in runs_scores if pair in s]
        if len(values) < n_runs:
            # a pair must be scoreable in every run to get an SD
            continue
        arr = np.asarray(values)
        sd[pair] = float(arr.std(ddof=1))
        mean[pair] = float(arr.mean())
    return UncertaintyResult(method=method, runs=n_runs, sd=sd,
                             mean_kge=mean)


def _noise_columns(prepared, scope):
    if scope == RUNOFF_ONLY:
        return [
            i for i, n in enumerate(prepared.dynamic_names)
            if prepared.feature_groups[n] == "Q"
        ]
    if scope == ALL_DYNAMIC:
        return [
            i for i, n in enumerate(prepared.dynamic_names)
            if prepared.feature_groups[n] != "Time"
        ]
    raise ConfigurationError("unknown TTA scope %r" % (scope,))


def perturb_inputs(prepared, test_masks, noise_sigma, scope, rng):
    """Gaussian-perturbed copy of the normalized dynamics of test basins.

    Filled positions carry no information, so they are restored after the
    noise is added; basins outside the evaluation masks are shared, not
    copied.
    """
    columns = _noise_columns(prepared, scope)
    basins = {}
    for basin_id, basin in prepared.basins.items():
        if basin_id not in test_masks or not columns:
            basins[basin_id] = basin
            continue
        dyn = basin.dynamics.copy()
        eta = rng.standard_normal((dyn.shape[0], len(columns)))
        block = dyn[:, columns] + noise_sigma * eta
        filled = basin.fill_mask[:, columns]
        block[filled] = dyn[:, columns][filled]
        dyn[:, columns] = block
        basins[basin_id] = dataclasses.replace(basin, dynamics=dyn)
    return dataclasses.replace(prepared, basins=basins)


def tta_uncertainty(model, prepared, dataset, test_masks, noise_sigma=0.1,
                    n_runs=50, scope=RUNOFF_ONLY, seed=0,
                    evaluate=evaluate_model):
    """SD of KGE over repeated inference under input noise.

    ``evaluate`` is injectable so a closed-form predictor can stand in
    for a trained model when validating the protocol itself.
    """
    if n_runs < 2:
        raise ConfigurationError("n_runs must be >= 2")
    if noise_sigma < 0.0:
        raise ConfigurationError("noise sigma must be >= 0")
    runs = []
    for r in range(n_runs):
        rng = np.random.default_rng([int(seed), r])
        if noise_sigma == 0.0:
            noisy = prepared
        else:
            noisy = perturb_inputs(prepared, test_masks, noise_sigma,
                                   scope, rng)
        runs.append(evaluate(model, noisy, dataset, test_masks))
    return _collect(TTA, runs, n_runs)


def mc_dropout_uncertainty(model, prepared, dataset, test_masks, p=0.3,
                           n_runs=50, seed=0):
    """SD of KGE over stochastic forward passes with dropout active."""
    if n_runs < 2:
        raise ConfigurationError("n_runs must be >= 2")
    if not 0.0 <= p < 1.0:
        raise ConfigurationError("dropout probability must lie in [0, 1)")
    runs = []
    for r in range(n_runs):
        rng = np.random.default_rng([int(seed), r])
        runs.append(
            evaluate_model(
                model, prepared, dataset, test_masks,
                rng=rng if p > 0.0 else None,
                dropout_p=p,
            )
        )
    return _collect(MC_DROPOUT, runs, n_runs)
