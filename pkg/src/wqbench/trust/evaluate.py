"""Shared plumbing for the trust protocols.

Evaluation is always on the original measurement scale: predictions are
denormalized with the training-time statistics before scoring, and the
observations come from the raw (never normalized, never corrupted)
dataset.
"""

import dataclasses

import numpy as np

from ..dataio.normalize import PreparedData
from ..dataio.schema import select_feature_columns
from ..errors import InsufficientDataError, MetricUndefinedError
from ..metrics import kge
from ..models import ModelSpec, TrainConfig, build, predict_rows, train_model


def derive_seed(seed, tag):
    """Deterministic child seed from a base seed and a hashable tag.

    The tag is digested with SHA-256 so the stream is stable across
    processes and platforms.
    """
    import hashlib

    digest = hashlib.sha256(repr(tag).encode("utf-8")).digest()
    word = int.from_bytes(digest[:4], "little")
    h = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, word])
    return int(h.generate_state(1)[0])


def train_family(family, prepared, row_masks, train_config=None, seed=0,
                 **spec_kw):
    """Build and train one model of a family on prepared data."""
    n_static = len(
        next(iter(prepared.basins.values())).statics
    )
    spec = ModelSpec(
        family=family,
        n_dynamic_features=len(prepared.dynamic_names),
        n_static_features=n_static,
        n_targets=len(prepared.target_names),
        **spec_kw,
    )
    model = build(spec, seed)
    train_model(model, prepared, row_masks, train_config or TrainConfig())
    return model


def prediction_pairs(model, prepared, dataset, row_masks, rng=None,
                     dropout_p=0.0):
    """Yield (basin id, variable name, observed, predicted) per pair.

    Predictions are denormalized to the measurement scale; pairs with
    fewer than two observations are skipped.  Passing ``rng`` and
    ``dropout_p`` makes each forward pass stochastic.
    """
    for basin_id in sorted(row_masks):
        rows = np.flatnonzero(row_masks[basin_id])
        if rows.size == 0:
            continue
        basin = prepared.basins[basin_id]
        raw = dataset.basin(basin_id)
        pred = predict_rows(model, prepared, basin_id, rows, rng=rng,
                            dropout_p=dropout_p)
        for k, name in enumerate(prepared.target_names):
            observed = basin.target_mask[rows, k]
            if observed.sum() < 2:
                continue
            o = raw.targets[rows, k][observed]
            p = prepared.denormalize_target(k, pred[observed, k])
            yield basin_id, name, o, p


def evaluate_model(model, prepared, dataset, row_masks, rng=None,
                   dropout_p=0.0):
    """KGE per (basin id, variable name) over the masked rows.

    Pairs with fewer than two observations or undefined KGE are skipped.
    Passing ``rng`` and ``dropout_p`` makes each forward pass stochastic.
    """
    scores = {}
    for basin_id, name, o, p in prediction_pairs(
            model, prepared, dataset, row_masks, rng=rng,
            dropout_p=dropout_p):
        try:
            scores[(basin_id, name)] = kge(o, p)
        except (MetricUndefinedError, InsufficientDataError):
            continue
    return scores


def median_kge_by_variable(scores):
    """Median KGE across basins, one entry per variable."""
    by_var = {}
    for (_, name), breakdown in scores.items():
        by_var.setdefault(name, []).append(breakdown.kge)
    return {name: float(np.median(v)) for name, v in by_var.items()}


def restrict_features(prepared, groups):
    """Project prepared data onto the dynamic columns of chosen groups.

    Calendar features stay in regardless; static attributes are kept
    only when "BA" is among the groups.  Returns a new PreparedData.
    """
    class _View:
        dynamic_names = prepared.dynamic_names
        feature_groups = prepared.feature_groups

    columns, keep_statics = select_feature_columns(_View, groups)
    names = tuple(prepared.dynamic_names[i] for i in columns)
    basins = {}
    for basin_id, basin in prepared.basins.items():
        basins[basin_id] = dataclasses.replace(
            basin,
            dynamics=basin.dynamics[:, columns],
            fill_mask=basin.fill_mask[:, columns],
            statics=basin.statics if keep_statics else basin.statics[:0],
        )
    return PreparedData(
        basins=basins,
        stats=prepared.stats,
        dynamic_names=names,
        target_names=prepared.target_names,
        feature_groups={n: prepared.feature_groups[n] for n in names},
        dates=prepared.dates,
    )
