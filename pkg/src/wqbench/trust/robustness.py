"""Robustness protocol: retrain under corruption, track KGE decay.

The sweep corrupts training data only, retrains with the same seed, and
evaluates on clean held-out data.  Outliers and noise act on raw values
before normalization (their magnitudes are defined on measurement
scales); adversarial perturbations act on normalized inputs via the
attack generator, with each selected sample's prediction-day row
receiving its crafted delta.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .. import corrupt as cr
from ..dataio import prepare, split
from ..errors import SweepError
from ..metrics import percent_change, theil_sen
from ..models import assemble_batch
from .evaluate import derive_seed, evaluate_model, train_family


@dataclass(frozen=True)
class RobustnessCurve:
    levels: tuple  # corruption fractions, 0.0 first
    median_pct_change: tuple  # per level, same order
    theil_sen_beta: float  # percent KGE change per 0.1 corruption
    n_pairs: int


def build_robustness_curve(levels, median_changes, n_pairs=0):
    """Assemble a curve from per-level medians; anchors (0, 0) itself."""
    pts = sorted(zip([float(l) for l in levels],
                     [float(c) for c in median_changes]))
    levels = [0.0] + [l for l, _ in pts]
    changes = [0.0] + [c for _, c in pts]
    slope = theil_sen(np.array(levels), np.array(changes))
    return RobustnessCurve(
        levels=tuple(levels),
        median_pct_change=tuple(changes),
        theil_sen_beta=0.1 * slope,
        n_pairs=int(n_pairs),
    )


def corrupt_training_dataset(dataset, train_masks, spec):
    """Raw-space outlier/noise corruption of the training rows.

    Features side touches the non-calendar dynamic columns; targets side
    touches observed target entries only (masks never flip).
    """
    feature_columns = [
        i
        for i, name in enumerate(dataset.dynamic_names)
        if dataset.feature_groups[name] != "Time"
    ]
    records = []
    for b_idx, record in enumerate(dataset.basins):
        if record.id not in train_masks:
            records.append(record)
            continue
        candidates = train_masks[record.id]
        basin_spec = dataclasses.replace(
            spec, seed=derive_seed(spec.seed, (record.id, b_idx))
        )
        if spec.side == cr.FEATURES:
            if spec.kind == cr.OUTLIER:
                result = cr.inject_outliers(
                    record.dynamics, candidates, basin_spec,
                    columns=feature_columns,
                )
            else:
                result = cr.inject_noise(
                    record.dynamics, basin_spec,
                    mask_candidates=candidates, columns=feature_columns,
                )
            records.append(
                dataclasses.replace(record, dynamics=result.data)
            )
        else:
            observed_any = record.target_mask.any(axis=1)
            cand = candidates & observed_any
            if spec.kind == cr.OUTLIER:
                result = cr.inject_outliers(
                    record.targets, cand, basin_spec
                )
            else:
                result = cr.inject_noise(
                    record.targets, basin_spec, mask_candidates=cand
                )
            # never corrupt unobserved entries
            data = np.where(record.target_mask, result.data, record.targets)
            records.append(dataclasses.replace(record, targets=data))
    return dataclasses.replace(dataset, basins=tuple(records))


def _adversarial_training_data(model, prepared, row_masks, spec):
    """Attack the training samples and write prediction-day deltas back."""
    from ..models.training import sample_index

    samples = sample_index(prepared, row_masks)
    if not samples:
        raise SweepError("no training samples to attack")
    batch = assemble_batch(model.spec, prepared, samples)
    attack = cr.pgd_attack(model, batch, spec)
    day_key = {
        "recurrent": ("dynamic", True),
        "operator": ("dynamic", False),
        "attention": ("now", False),
    }[model.spec.family]
    key, windowed = day_key
    new_dynamics = {
        basin_id: basin.dynamics.copy()
        for basin_id, basin in prepared.basins.items()
    }
    for i in attack.rows:
        basin_id, row = samples[i]
        value = attack.inputs[key][i]
        new_dynamics[basin_id][row] = value[-1] if windowed else value
    basins = {
        basin_id: dataclasses.replace(basin, dynamics=new_dynamics[basin_id])
        for basin_id, basin in prepared.basins.items()
    }
    return dataclasses.replace(prepared, basins=basins)


def robustness_sweep(family, dataset, corruption_specs, split_plan,
                     train_config=None, seed=0, min_base_kge=0.1,
                     **spec_kw):
    """Clean baseline plus one retrain per corruption level."""
    result = split(dataset, split_plan)
    prepared = prepare(dataset, result.train)
    baseline = train_family(
        family, prepared, result.train, train_config=train_config,
        seed=seed, **spec_kw,
    )
    base_scores = evaluate_model(baseline, prepared, dataset, result.test)
    kept = {
        pair: s.kge for pair, s in base_scores.items()
        if s.kge >= min_base_kge
    }
    if not kept:
        raise SweepError(
            "no (basin, variable) pair reaches baseline KGE >= %g"
            % min_base_kge
        )

    levels = []
    medians = []
    for spec in corruption_specs:
        if spec.kind == cr.ADVERSARIAL:
            prepared_level = _adversarial_training_data(
                baseline, prepared, result.train, spec
            )
        else:
            corrupted = corrupt_training_dataset(
                dataset, result.train, spec
            )
            prepared_level = prepare(corrupted, result.train)
        retrained = train_family(
            family, prepared_level, result.train,
            train_config=train_config, seed=seed, **spec_kw,
        )
        # clean test data, original-scale observations
        scores = evaluate_model(retrained, prepared_level, dataset,
                                result.test)
        changes = [
            percent_change(kept[pair], scores[pair].kge)
            for pair in kept
            if pair in scores
        ]
        if not changes:
            raise SweepError(
                "corruption level %g left no evaluable pairs"
                % spec.fraction
            )
        levels.append(spec.fraction)
        medians.append(float(np.median(changes)))
    return build_robustness_curve(levels, medians, n_pairs=len(kept))
