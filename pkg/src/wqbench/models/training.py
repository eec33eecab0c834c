"""Shared trainer: sample assembly, masked loss, Adam/AdamW, schedules.

A sample is a (basin id, calendar row) pair whose row has at least one
observed target.  Windows reaching before the calendar start are padded
with the fill value -1; the per-sample fill masks record both this
padding and fills already present in the normalized data, so downstream
perturbation code can avoid touching values that are not real inputs.
"""

from dataclasses import dataclass

import numpy as np

from .. import ndcore as nd
from ..dataio.schema import FILL_VALUE
from ..errors import ConfigurationError, ContractError
from .attention import forward_attention_batch
from .operator import forward_operator_batch
from .recurrent import forward_recurrent_batch
from .spec import ATTENTION, OPERATOR, RECURRENT


@dataclass
class SampleBatch:
    inputs: dict  # name -> float array
    fill: dict  # name -> bool array, True where the value is a fill
    targets: np.ndarray  # [B, K], zeros where unobserved
    mask: np.ndarray  # [B, K] bool
    samples: list  # (basin_id, row) pairs


@dataclass
class TrainResult:
    model: object
    epoch_losses: list


def perturbable_keys(family):
    """Input arrays that live in normalized dynamic-feature space."""
    if family == ATTENTION:
        return ("history", "recent", "now")
    return ("dynamic",)


def sample_index(prepared, row_masks):
    """All (basin id, row) pairs with an observed target in masked rows."""
    samples = []
    for basin_id in sorted(row_masks):
        basin = prepared.basins[basin_id]
        rows = np.flatnonzero(
            row_masks[basin_id] & basin.target_mask.any(axis=1)
        )
        samples.extend((basin_id, int(t)) for t in rows)
    return samples


def _window(values, fills, end_row, length):
    """Rows (end_row-length+1 .. end_row), -1 padded before the calendar."""
    t0 = end_row - length + 1
    idx = np.arange(t0, end_row + 1)
    valid = idx >= 0
    out = np.full((length, values.shape[1]), FILL_VALUE)
    fill = np.ones((length, values.shape[1]), dtype=bool)
    out[valid] = values[idx[valid]]
    fill[valid] = fills[idx[valid]]
    return out, fill


def assemble_batch(spec, prepared, samples):
    """Build the family-appropriate input arrays for a list of samples."""
    if not samples:
        raise ContractError("assemble_batch requires at least one sample")
    statics = []
    coords = []
    targets = []
    masks = []
    dyn = []
    dyn_fill = []
    recent = []
    recent_fill = []
    now = []
    now_fill = []
    for basin_id, row in samples:
        basin = prepared.basins[basin_id]
        statics.append(basin.statics)
        coords.append(basin.coords)
        y = basin.targets[row]
        m = basin.target_mask[row]
        targets.append(np.where(m, y, 0.0))
        masks.append(m)
        if spec.family == OPERATOR:
            dyn.append(basin.dynamics[row])
            dyn_fill.append(basin.fill_mask[row])
            continue
        w, f = _window(basin.dynamics, basin.fill_mask, row, spec.seq_len)
        dyn.append(w)
        dyn_fill.append(f)
        if spec.family == ATTENTION:
            w, f = _window(
                basin.dynamics, basin.fill_mask, row - 1,
                spec.decoder_window,
            )
            recent.append(w)
            recent_fill.append(f)
            now.append(basin.dynamics[row])
            now_fill.append(basin.fill_mask[row])

    inputs = {"static": np.stack(statics)}
    fill = {}
    if spec.family == OPERATOR:
        inputs["dynamic"] = np.stack(dyn)
        inputs["coords"] = np.stack(coords)
        fill["dynamic"] = np.stack(dyn_fill)
    elif spec.family == RECURRENT:
        inputs["dynamic"] = np.stack(dyn)
        fill["dynamic"] = np.stack(dyn_fill)
    else:
        inputs["history"] = np.stack(dyn)
        inputs["recent"] = np.stack(recent)
        inputs["now"] = np.stack(now)
        fill["history"] = np.stack(dyn_fill)
        fill["recent"] = np.stack(recent_fill)
        fill["now"] = np.stack(now_fill)
    return SampleBatch(
        inputs=inputs,
        fill=fill,
        targets=np.stack(targets),
        mask=np.stack(masks),
        samples=list(samples),
    )


def forward_batch(model, inputs, rng=None, dropout_p=None):
    """Dispatch a batch of assembled inputs through the right forward."""
    spec = model.spec
    if spec.family == RECURRENT:
        return forward_recurrent_batch(
            model.parameters, spec, inputs["dynamic"], inputs["static"],
            rng=rng, dropout_p=dropout_p,
        )
    if spec.family == OPERATOR:
        return forward_operator_batch(
            model.parameters, spec, inputs["dynamic"], inputs["static"],
            inputs["coords"], rng=rng, dropout_p=dropout_p,
        )
    return forward_attention_batch(
        model.parameters, spec, inputs["history"], inputs["recent"],
        inputs["now"], inputs["static"], rng=rng, dropout_p=dropout_p,
    )


def masked_mse(pred, targets, mask):
    """Mean squared error over observed target entries only."""
    count = int(mask.sum())
    if count == 0:
        raise ConfigurationError("batch has no observed targets")
    m = nd.Tensor(mask.astype(float))
    y = nd.Tensor(np.where(mask, targets, 0.0))
    diff = nd.sub(pred, y)
    return nd.div(nd.tsum(nd.mul(nd.mul(diff, diff), m)), float(count))


class _AdamState:
    def __init__(self, params):
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0


def _optimizer_step(params, state, lr, config):
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        if p.grad is None:
            continue
        g = p.grad
        if config.optimizer == "adam" and config.weight_decay:
            g = g + config.weight_decay * p.data
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        update = (state.m[name] / bc1) / (
            np.sqrt(state.v[name] / bc2) + eps
        )
        if config.optimizer == "adamw" and config.weight_decay:
            p.data = p.data - lr * config.weight_decay * p.data
        p.data = p.data - lr * update


def train_model(model, prepared, row_masks, config):
    """Optimize the masked MSE over the indexed training samples."""
    samples = sample_index(prepared, row_masks)
    if not samples:
        raise ConfigurationError("training set has no observed targets")
    rng = np.random.default_rng([int(model.seed), 0x7E5])
    dropout_rng = (
        np.random.default_rng([int(model.seed), 0xD0])
        if model.spec.dropout > 0.0
        else None
    )
    state = _AdamState(model.parameters)
    losses = []
    for epoch in range(config.epochs):
        lr = config.schedule.rate(config.lr, epoch, config.epochs)
        order = rng.permutation(len(samples))
        total = 0.0
        seen = 0
        for start in range(0, len(samples), config.batch_size):
            chosen = [samples[i] for i in order[start:start + config.batch_size]]
            batch = assemble_batch(model.spec, prepared, chosen)
            for p in model.parameters.values():
                p.grad = None
            with nd.Tape() as tape:
                pred = forward_batch(model, batch.inputs, rng=dropout_rng)
                loss = masked_mse(pred, batch.targets, batch.mask)
                tape.backward(loss)
            _optimizer_step(model.parameters, state, lr, config)
            total += loss.item() * len(chosen)
            seen += len(chosen)
        losses.append(total / seen)
    model.epoch_losses = list(losses)
    return TrainResult(model=model, epoch_losses=list(losses))


def predict_rows(model, prepared, basin_id, rows, rng=None, dropout_p=None,
                 chunk=256):
    """Predictions (normalized space) for calendar rows of one basin."""
    rows = [int(r) for r in rows]
    out = np.empty((len(rows), model.spec.n_targets))
    for start in range(0, len(rows), chunk):
        part = [(basin_id, r) for r in rows[start:start + chunk]]
        batch = assemble_batch(model.spec, prepared, part)
        pred = forward_batch(
            model, batch.inputs, rng=rng, dropout_p=dropout_p
        )
        out[start:start + len(part)] = pred.data
    return out
