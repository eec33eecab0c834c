"""Branch-trunk operator network over same-day features.

The branch encodes the day's dynamic features plus static attributes,
the trunk encodes the normalized (longitude, latitude) pair, both
through seven tanh blocks of equal width.  The two embeddings are fused
by element-wise multiplication and decoded by a two-block network whose
widths are (hidden, hidden/2).
"""

from .. import ndcore as nd
from ..errors import DimensionError
from .layers import linear, linear_layout, maybe_dropout

N_BLOCKS = 7


def layout(spec):
    h = spec.hidden
    entries = []
    n_in = spec.n_dynamic_features + spec.n_static_features
    for l in range(N_BLOCKS):
        entries.extend(linear_layout("branch%d" % l, n_in, h))
        n_in = h
    n_in = 2
    for l in range(N_BLOCKS):
        entries.extend(linear_layout("trunk%d" % l, n_in, h))
        n_in = h
    entries.extend(linear_layout("d0", h, h))
    entries.extend(linear_layout("d1", h, max(1, h // 2)))
    entries.extend(linear_layout("head", max(1, h // 2), spec.n_targets))
    return entries


def _mlp(params, prefix, x, p, rng):
    for l in range(N_BLOCKS):
        x = nd.tanh(linear(params, "%s%d" % (prefix, l), x))
        x = maybe_dropout(x, p, rng)
    return x


def forward_operator_batch(params, spec, dynamic, static, coords, rng=None,
                           dropout_p=None):
    """dynamic: [B, F_d]; static: [B, F_s]; coords: [B, 2] -> [B, K]."""
    dynamic = dynamic if isinstance(dynamic, nd.Tensor) else nd.Tensor(dynamic)
    static = static if isinstance(static, nd.Tensor) else nd.Tensor(static)
    coords = coords if isinstance(coords, nd.Tensor) else nd.Tensor(coords)
    if dynamic.shape[-1] != spec.n_dynamic_features:
        raise DimensionError(
            "expected %d dynamic features, got %d"
            % (spec.n_dynamic_features, dynamic.shape[-1])
        )
    if coords.shape[-1] != 2:
        raise DimensionError("coords must have two columns")
    p = spec.dropout if dropout_p is None else dropout_p
    branch_in = nd.concat([dynamic, static], axis=1)
    branch = _mlp(params, "branch", branch_in, p, rng)
    trunk = _mlp(params, "trunk", coords, p, rng)
    fused = nd.mul(branch, trunk)
    x = nd.tanh(linear(params, "d0", fused))
    x = maybe_dropout(x, p, rng)
    x = nd.tanh(linear(params, "d1", x))
    x = maybe_dropout(x, p, rng)
    return linear(params, "head", x)


def forward_operator(model, same_day_dynamic, static, coords, rng=None,
                     dropout_p=None):
    """same_day_dynamic: [F_d]; static: [F_s]; coords: [2] -> [K]."""
    def row(x):
        t = x if isinstance(x, nd.Tensor) else nd.Tensor(x)
        return nd.reshape(t, (1, t.shape[-1]))

    out = forward_operator_batch(
        model.parameters, model.spec, row(same_day_dynamic), row(static),
        row(coords), rng=rng, dropout_p=dropout_p,
    )
    return nd.reshape(out, (model.spec.n_targets,))
