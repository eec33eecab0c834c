"""Deterministic data corruption: outliers, noise, adversarial attacks.

Every generator selects exactly round(fraction * N) rows from the
candidate set by seeded sampling without replacement, leaves all other
rows bit-identical, and emits a JSON-serializable manifest so a
corruption can be audited and reproduced.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import ndcore as nd
from .errors import ConfigurationError, ContractError, CorruptionError
from .models.training import forward_batch, masked_mse, perturbable_keys

OUTLIER = "outlier"
NOISE = "noise"
ADVERSARIAL = "adversarial"

FEATURES = "features"
TARGETS = "targets"

# paper-replication fractions per corruption kind
CORRUPTION_PRESETS = {
    OUTLIER: (0.1, 0.2, 0.3),
    ADVERSARIAL: (0.1, 0.2, 0.3),
    NOISE: (0.3, 0.4, 0.5),
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    side: str = FEATURES
    fraction: float = 0.1
    noise_sigma: float = 0.1
    epsilon: float = 0.1
    step: float = 0.025
    iters: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (OUTLIER, NOISE, ADVERSARIAL):
            raise ConfigurationError("unknown corruption kind %r" % self.kind)
        if self.side not in (FEATURES, TARGETS):
            raise ConfigurationError("unknown corruption side %r" % self.side)
        if self.kind == ADVERSARIAL and self.side != FEATURES:
            raise ConfigurationError(
                "adversarial corruption applies to features only"
            )
        if not 0.0 < self.fraction < 1.0:
            raise ConfigurationError("fraction must lie in (0, 1)")
        if self.noise_sigma < 0.0:
            raise ConfigurationError("noise sigma must be >= 0")
        if self.epsilon < 0.0 or self.step < 0.0:
            raise ConfigurationError("attack budget and step must be >= 0")
        if self.iters < 1:
            raise ConfigurationError("iters must be >= 1")


@dataclass
class CorruptionResult:
    data: np.ndarray
    rows: np.ndarray  # corrupted row indices, sorted
    manifest: dict


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _select_rows(n_candidates, candidate_rows, spec):
    n_pick = _round_half_up(spec.fraction * n_candidates)
    if n_pick < 1:
        raise CorruptionError(
            "fraction %.3g of %d candidate rows selects no rows"
            % (spec.fraction, n_candidates)
        )
    rng = np.random.default_rng(spec.seed)
    picked = rng.choice(candidate_rows, size=n_pick, replace=False)
    return np.sort(picked), rng


def _candidates(data, mask_candidates):
    if mask_candidates is None:
        return np.arange(data.shape[0])
    return np.flatnonzero(mask_candidates)


def inject_outliers(data, mask_candidates, spec, columns=None):
    """Replace selected values with the 3*IQR fences of their columns.

    ``data`` is [N, C]; candidate statistics (quartiles) come from the
    candidate rows of the clean input.  Each selected value moves to
    Q3 + 3*IQR or Q1 - 3*IQR, the side drawn by a fair seeded coin.
    """
    if spec.kind != OUTLIER:
        raise ConfigurationError("spec kind must be outlier")
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ContractError("inject_outliers expects a 2-D array")
    candidate_rows = _candidates(data, mask_candidates)
    rows, rng = _select_rows(candidate_rows.size, candidate_rows, spec)
    if columns is None:
        columns = list(range(data.shape[1]))

    out = data.copy()
    sides = {}
    for col in columns:
        pool = data[candidate_rows, col]
        pool = pool[np.isfinite(pool)]
        if pool.size == 0:
            raise CorruptionError("column %d has no finite values" % col)
        q1, q3 = np.percentile(pool, [25.0, 75.0])
        iqr = q3 - q1
        upper = q3 + 3.0 * iqr
        lower = q1 - 3.0 * iqr
        coin = rng.random(rows.size) < 0.5
        values = np.where(coin, upper, lower)
        keep_nan = ~np.isfinite(data[rows, col])
        values[keep_nan] = data[rows, col][keep_nan]
        out[rows, col] = values
        sides[int(col)] = ["upper" if c else "lower" for c in coin]
    manifest = {
        "kind": OUTLIER,
        "side": spec.side,
        "fraction": spec.fraction,
        "seed": spec.seed,
        "rows": [int(r) for r in rows],
        "columns": [int(c) for c in columns],
        "sides": sides,
    }
    return CorruptionResult(data=out, rows=rows, manifest=manifest)


def inject_noise(data, spec, mask_candidates=None, columns=None):
    """Additive column-scaled noise on features, proportional on targets.

    Features: x' = x + eta, eta ~ Normal(0, sigma * std_col).
    Targets:  y' = y * (1 + eta), eta ~ Normal(0, sigma).
    """
    if spec.kind != NOISE:
        raise ConfigurationError("spec kind must be noise")
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ContractError("inject_noise expects a 2-D array")
    candidate_rows = _candidates(data, mask_candidates)
    rows, rng = _select_rows(candidate_rows.size, candidate_rows, spec)
    if columns is None:
        columns = list(range(data.shape[1]))

    out = data.copy()
    for col in columns:
        values = data[rows, col]
        finite = np.isfinite(values)
        eta = rng.standard_normal(rows.size)
        if spec.side == FEATURES:
            pool = data[candidate_rows, col]
            pool = pool[np.isfinite(pool)]
            if pool.size == 0:
                raise CorruptionError("column %d has no finite values" % col)
            scale = spec.noise_sigma * float(pool.std())
            noisy = values + scale * eta
        else:
            noisy = values * (1.0 + spec.noise_sigma * eta)
        out[rows, col] = np.where(finite, noisy, values)
    manifest = {
        "kind": NOISE,
        "side": spec.side,
        "fraction": spec.fraction,
        "sigma": spec.noise_sigma,
        "seed": spec.seed,
        "rows": [int(r) for r in rows],
        "columns": [int(c) for c in columns],
    }
    return CorruptionResult(data=out, rows=rows, manifest=manifest)


@dataclass
class AttackResult:
    inputs: dict  # perturbed copies of the batch input arrays
    rows: np.ndarray  # attacked sample indices within the batch
    losses: list  # masked loss on the attacked rows, before each iterate
    manifest: dict


def _sub_batch(arrays, rows):
    return {k: v[rows] for k, v in arrays.items()}


def pgd_attack(model, batch, spec, forward=forward_batch):
    """Projected gradient ascent on the batch loss, L-inf budget epsilon.

    Only a seeded fraction of the batch rows is attacked; perturbations
    never touch filled (missing-data) positions, and every returned
    delta satisfies |delta| <= epsilon coordinate-wise, machine exactly.
    ``forward`` maps (model, tensor dict) to predictions and is
    injectable so closed-form models can exercise the attack loop.
    """
    if spec.kind != ADVERSARIAL:
        raise ConfigurationError("spec kind must be adversarial")
    n = batch.targets.shape[0]
    rows, _ = _select_rows(n, np.arange(n), spec)
    keys = perturbable_keys(model.spec.family)
    clean = {k: np.array(v, dtype=float) for k, v in batch.inputs.items()}
    attacked = _sub_batch(clean, rows)
    fill = {k: batch.fill[k][rows] for k in keys}
    targets = batch.targets[rows]
    mask = batch.mask[rows]

    deltas = {k: np.zeros_like(attacked[k]) for k in keys}
    losses = []
    for _ in range(spec.iters):
        tensors = {}
        for k, v in attacked.items():
            if k in keys:
                tensors[k] = nd.Tensor(v + deltas[k], requires_grad=True)
            else:
                tensors[k] = nd.Tensor(v)
        with nd.Tape() as tape:
            pred = forward(model, tensors)
            loss = masked_mse(pred, targets, mask)
            tape.backward(loss)
        losses.append(float(loss.item()))
        if spec.epsilon == 0.0 or spec.step == 0.0:
            continue
        for k in keys:
            grad = tensors[k].grad
            if grad is None:
                raise ContractError(
                    "model produced no gradient for input %r" % k
                )
            step = spec.step * np.sign(grad)
            deltas[k] = np.clip(
                deltas[k] + step, -spec.epsilon, spec.epsilon
            )
            deltas[k][fill[k]] = 0.0

    perturbed = {k: v.copy() for k, v in clean.items()}
    for k in keys:
        updated = attacked[k] + deltas[k]
        updated[fill[k]] = attacked[k][fill[k]]
        # rounding in x + delta can overshoot the budget by an ulp when
        # the difference is recomputed; nudge such entries back until the
        # reconstructed perturbation is feasible machine-exactly
        over = np.abs(updated - attacked[k]) > spec.epsilon
        while np.any(over):
            updated[over] = np.nextafter(updated[over], attacked[k][over])
            over = np.abs(updated - attacked[k]) > spec.epsilon
        perturbed[k][rows] = updated

    # loss at the final iterate, for the audit trail
    tensors = {k: nd.Tensor(v[rows]) for k, v in perturbed.items()}
    final_pred = forward(model, tensors)
    losses.append(
        float(masked_mse(final_pred, targets, mask).item())
    )
    manifest = {
        "kind": ADVERSARIAL,
        "side": FEATURES,
        "fraction": spec.fraction,
        "epsilon": spec.epsilon,
        "step": spec.step,
        "iters": spec.iters,
        "seed": spec.seed,
        "rows": [int(r) for r in rows],
        "losses": losses,
    }
    return AttackResult(
        inputs=perturbed, rows=rows, losses=losses, manifest=manifest
    )
