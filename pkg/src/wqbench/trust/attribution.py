"""Feature-group attribution: ablation, traverse, integrated gradients.

All three methods score the same five feature groups (meteorology M,
runoff Q, reaction proxies RC, vegetation V, basin attributes BA) per
target variable.  Calendar features and coordinates are covariates: they
stay in every model and are never attributed.

Ablation retrains once per removed group and reports the percent drop in
median KGE.  Traverse retrains every subset of the groups and averages,
for each group, the percent KGE difference over the matched pairs
(S with the group, S without).  Both use the without-group score as the
percent denominator and a deterministic per-subset training seed, so a
one-group design gives bit-identical numbers from either method.

Integrated gradients needs no retraining: it integrates input gradients
along a straight path from a baseline to the observed input (midpoint
rule, the whole path evaluated as one batch) and aggregates mean |IG|
per feature into group scores.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .. import ndcore as nd
from ..dataio.schema import FILL_VALUE
from ..errors import (
    AttributionRunError,
    ConfigurationError,
    DimensionError,
)
from ..models import assemble_batch, forward_batch
from ..models.training import perturbable_keys, sample_index
from .evaluate import (
    derive_seed,
    evaluate_model,
    median_kge_by_variable,
    restrict_features,
    train_family,
)

ABLATION = "ablation"
TRAVERSE = "traverse"
INTEGRATED_GRADIENTS = "integrated_gradients"

ATTRIBUTION_GROUPS = ("M", "Q", "RC", "V", "BA")


@dataclass(frozen=True)
class AttributionResult:
    method: str
    raw: dict  # variable name -> {group: raw importance}
    shares: dict  # variable name -> {group: share}, sums to 1 per variable

    def __post_init__(self):
        for name, by_group in self.shares.items():
            total = sum(by_group.values())
            if abs(total - 1.0) > 1e-9:
                raise ConfigurationError(
                    "shares for %r sum to %r, not 1" % (name, total)
                )


def normalized_shares(raw):
    """Non-negative shares over groups, summing to 1.

    Negative importances clip to zero; if nothing is positive the mass
    is spread uniformly so downstream width plots stay defined.
    """
    if not raw:
        raise ConfigurationError("no groups to normalize")
    clipped = {g: max(0.0, float(v)) for g, v in raw.items()}
    total = sum(clipped.values())
    if total <= 0.0:
        return {g: 1.0 / len(clipped) for g in clipped}
    return {g: v / total for g, v in clipped.items()}


def _shares_by_variable(raw):
    return {name: normalized_shares(by_group) for name, by_group in
            raw.items()}


# ---------------------------------------------------------------------------
# retraining methods


def _present_groups(prepared, groups):
    have = set(prepared.feature_groups[n] for n in prepared.dynamic_names)
    n_static = next(iter(prepared.basins.values())).statics.shape[0]
    if n_static > 0:
        have.add("BA")
    missing = [g for g in groups if g not in have]
    if missing:
        raise ConfigurationError(
            "groups %r have no features in this dataset" % (missing,)
        )
    return tuple(groups)


def _score_subsets(family, prepared, dataset, train_masks, test_masks,
                   subsets, train_config, seed, spec_kw):
    """Train one model per feature subset, score median KGE per variable."""
    scores = {}
    for subset in subsets:
        sub = restrict_features(prepared, subset)
        try:
            model = train_family(
                family, sub, train_masks,
                train_config=train_config,
                seed=derive_seed(seed, ("subset", tuple(sorted(subset)))),
                **spec_kw,
            )
            pair_scores = evaluate_model(model, sub, dataset, test_masks)
        except Exception as exc:
            raise AttributionRunError(
                "run failed for group subset %r: %s"
                % (sorted(subset), exc)
            ) from exc
        scores[frozenset(subset)] = median_kge_by_variable(pair_scores)
    return scores


def _pair_delta(with_scores, without_scores, name, min_kge):
    """Percent KGE difference of one (with, without) subset pair."""
    if name not in with_scores or name not in without_scores:
        return None
    base = without_scores[name]
    if base < min_kge:
        return None
    return 100.0 * (with_scores[name] - base) / abs(base)


def aggregate_ablation(subset_scores, groups, min_kge=0.1):
    """Per-variable percent KGE drop when each group leaves the full set.

    ``subset_scores`` maps frozenset-of-groups to {variable: median KGE}
    and must contain the full set and every leave-one-out subset.
    """
    full = frozenset(groups)
    variables = sorted(subset_scores[full])
    raw = {}
    for name in variables:
        by_group = {}
        for g in groups:
            delta = _pair_delta(
                subset_scores[full], subset_scores[full - {g}], name,
                min_kge,
            )
            by_group[g] = 0.0 if delta is None else delta
        raw[name] = by_group
    return raw


def aggregate_traverse(subset_scores, groups, min_kge=0.1):
    """Mean percent KGE difference over all matched subset pairs.

    For each group g the matched pairs are (S | {g}, S) for every subset
    S of the remaining groups; pairs whose without-score fails the KGE
    floor are skipped and a group with no usable pairs scores 0.
    """
    variables = sorted(set().union(*subset_scores.values()))
    raw = {}
    for name in variables:
        by_group = {}
        for g in groups:
            rest = [x for x in groups if x != g]
            deltas = []
            for r in range(len(rest) + 1):
                for combo in itertools.combinations(rest, r):
                    s = frozenset(combo)
                    delta = _pair_delta(
                        subset_scores[s | {g}], subset_scores[s], name,
                        min_kge,
                    )
                    if delta is not None:
                        deltas.append(delta)
            by_group[g] = float(np.mean(deltas)) if deltas else 0.0
        raw[name] = by_group
    return raw


def ablation_importance(family, dataset, split_plan,
                        groups=ATTRIBUTION_GROUPS, train_config=None,
                        seed=0, min_kge=0.1, **spec_kw):
    """Leave-one-group-out importance: full model plus one retrain per
    group."""
    from ..dataio import prepare, split

    result = split(dataset, split_plan)
    prepared = prepare(dataset, result.train)
    groups = _present_groups(prepared, groups)
    subsets = [tuple(groups)] + [
        tuple(x for x in groups if x != g) for g in groups
    ]
    scores = _score_subsets(family, prepared, dataset, result.train,
                            result.test, subsets, train_config, seed,
                            spec_kw)
    raw = aggregate_ablation(scores, groups, min_kge)
    return AttributionResult(ABLATION, raw, _shares_by_variable(raw))


def traverse_importance(family, dataset, split_plan,
                        groups=ATTRIBUTION_GROUPS, train_config=None,
                        seed=0, min_kge=0.1, **spec_kw):
    """Shapley-style importance from all 2^n feature-group subsets."""
    from ..dataio import prepare, split

    result = split(dataset, split_plan)
    prepared = prepare(dataset, result.train)
    groups = _present_groups(prepared, groups)
    subsets = [
        combo
        for r in range(len(groups) + 1)
        for combo in itertools.combinations(groups, r)
    ]
    scores = _score_subsets(family, prepared, dataset, result.train,
                            result.test, subsets, train_config, seed,
                            spec_kw)
    raw = aggregate_traverse(scores, groups, min_kge)
    return AttributionResult(TRAVERSE, raw, _shares_by_variable(raw))


# ---------------------------------------------------------------------------
# integrated gradients


def default_baseline(spec, inputs):
    """Fill-value baseline for dynamic features, zero for the rest."""
    dynamic = set(perturbable_keys(spec.family))
    return {
        k: np.full_like(v, FILL_VALUE) if k in dynamic else
        np.zeros_like(v)
        for k, v in inputs.items()
    }


def _check_like(inputs, baseline):
    if set(baseline) != set(inputs):
        raise DimensionError(
            "baseline keys %r do not match input keys %r"
            % (sorted(baseline), sorted(inputs))
        )
    for k, v in inputs.items():
        if np.shape(baseline[k]) != np.shape(v):
            raise DimensionError(
                "baseline[%r] has shape %s, expected %s"
                % (k, np.shape(baseline[k]), np.shape(v))
            )


def _forward_value(model, inputs, target_index, forward):
    out = forward(model, {k: nd.Tensor(np.asarray(v, dtype=float))
                          for k, v in inputs.items()})
    return float(out.data[0, target_index])


def integrated_gradients(model, inputs, baseline=None, n_steps=64,
                         target_index=0, forward=forward_batch):
    """Midpoint-rule path integral of input gradients, one sample.

    ``inputs`` is a dict of arrays with a leading batch axis of one, as
    produced by assembling a single sample.  Returns a dict with the
    same keys, batch axis dropped: attribution of each input entry to
    the selected target output.  ``forward`` maps (model, tensor dict)
    to a [batch, n_targets] tensor and is injectable so closed-form
    predictors can be attributed with the same machinery.
    """
    if n_steps < 1:
        raise ConfigurationError("n_steps must be >= 1")
    inputs = {k: np.asarray(v, dtype=float) for k, v in inputs.items()}
    for k, v in inputs.items():
        if v.ndim < 1 or v.shape[0] != 1:
            raise DimensionError(
                "input %r must carry a leading batch axis of one" % (k,)
            )
    if baseline is None:
        baseline = default_baseline(model.spec, inputs)
    baseline = {k: np.asarray(v, dtype=float) for k, v in baseline.items()}
    _check_like(inputs, baseline)

    alphas = (np.arange(n_steps) + 0.5) / n_steps
    diffs = {k: inputs[k] - baseline[k] for k in inputs}
    tensors = {}
    for k, v in inputs.items():
        steps = alphas.reshape((n_steps,) + (1,) * (v.ndim - 1))
        path = baseline[k] + steps * diffs[k]  # [n_steps, ...]
        tensors[k] = nd.Tensor(path, requires_grad=True)

    with nd.Tape() as tape:
        out = forward(model, tensors)
        if not 0 <= target_index < out.shape[1]:
            raise ConfigurationError(
                "target index %d out of range for %d outputs"
                % (target_index, out.shape[1])
            )
        column = nd.narrow(out, 1, target_index, 1)
        tape.backward(nd.tsum(column))

    ig = {}
    for k, v in inputs.items():
        grad = tensors[k].grad
        if grad is None:
            grad = np.zeros_like(tensors[k].data)
        ig[k] = diffs[k][0] * grad.mean(axis=0)
    return ig


def ig_completeness(model, inputs, baseline=None, n_steps=64,
                    target_index=0, forward=forward_batch):
    """|sum of attributions - (F(x) - F(baseline))| for one sample."""
    inputs = {k: np.asarray(v, dtype=float) for k, v in inputs.items()}
    if baseline is None:
        baseline = default_baseline(model.spec, inputs)
    ig = integrated_gradients(model, inputs, baseline, n_steps,
                              target_index, forward=forward)
    total = sum(float(v.sum()) for v in ig.values())
    gap = (_forward_value(model, inputs, target_index, forward)
           - _forward_value(model, baseline, target_index, forward))
    return abs(total - gap)


def _feature_tallies(prepared, ig):
    """Net signed attribution per named feature for one sample."""
    tallies = {}
    for key, arr in ig.items():
        if key == "coords":
            continue  # coordinates are covariates, like calendar features
        if key == "static":
            for j, value in enumerate(np.atleast_1d(arr)):
                tallies[("BA", j)] = tallies.get(("BA", j), 0.0) + float(
                    value
                )
            continue
        block = np.atleast_2d(arr)  # [T, F] or [1, F] for single rows
        per_column = block.sum(axis=0)
        for j, name in enumerate(prepared.dynamic_names):
            group = prepared.feature_groups[name]
            if group == "Time":
                continue
            tallies[(group, name)] = tallies.get((group, name), 0.0) + float(
                per_column[j]
            )
    return tallies


def ig_group_aggregate(model, prepared, dataset, row_masks, n_steps=32,
                       max_samples=16, seed=0, baseline=None):
    """Mean |IG| per feature, averaged within groups, per variable.

    Attribution of a dynamic feature sums its signed contributions over
    every window position before the absolute value is taken; samples
    are drawn deterministically from the masked rows.
    """
    samples = sample_index(prepared, row_masks)
    if not samples:
        raise AttributionRunError("no samples available for attribution")
    rng = np.random.default_rng([int(seed), 0x16])
    if len(samples) > max_samples:
        pick = rng.choice(len(samples), size=max_samples, replace=False)
        samples = [samples[i] for i in sorted(pick)]

    sums = {}  # variable -> {(group, feature): running sum of |IG|}
    counts = {}  # variable -> samples contributing
    for sample in samples:
        basin_id, row = sample
        batch = assemble_batch(model.spec, prepared, [sample])
        for k, name in enumerate(prepared.target_names):
            if not prepared.basins[basin_id].target_mask[row, k]:
                continue
            ig = integrated_gradients(
                model, batch.inputs, baseline=baseline, n_steps=n_steps,
                target_index=k,
            )
            tallies = _feature_tallies(prepared, ig)
            bucket = sums.setdefault(name, {})
            for feature, value in tallies.items():
                bucket[feature] = bucket.get(feature, 0.0) + abs(value)
            counts[name] = counts.get(name, 0) + 1

    raw = {}
    for name, bucket in sums.items():
        n = counts[name]
        by_group = {}
        for (group, _), total in bucket.items():
            by_group.setdefault(group, []).append(total / n)
        raw[name] = {g: float(np.mean(v)) for g, v in by_group.items()}
    if not raw:
        raise AttributionRunError("no observed targets in the sampled rows")
    return AttributionResult(INTEGRATED_GRADIENTS, raw,
                             _shares_by_variable(raw))
