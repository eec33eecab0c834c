"""Shared building blocks: layouts, initialization, linear, layer norm."""

import numpy as np

from .. import ndcore as nd


def linear_layout(prefix, n_in, n_out):
    """Weight stored as [n_in, n_out] so forward is x @ W + b."""
    return [
        (prefix + ".w", (n_in, n_out), ("uniform", n_in)),
        (prefix + ".b", (n_out,), ("uniform", n_in)),
    ]


def norm_layout(prefix, width):
    return [
        (prefix + ".g", (width,), ("ones", None)),
        (prefix + ".b", (width,), ("zeros", None)),
    ]


def init_parameters(layout, seed):
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape, (kind, fan_in) in layout:
        if kind == "uniform":
            bound = 1.0 / np.sqrt(max(1, fan_in))
            data = rng.uniform(-bound, bound, size=shape)
        elif kind == "ones":
            data = np.ones(shape)
        elif kind == "zeros":
            data = np.zeros(shape)
        else:
            raise ValueError("unknown init kind %r" % (kind,))
        params[name] = nd.Tensor(data, requires_grad=True)
    return params


def linear(params, prefix, x):
    """x: [B, n_in] -> [B, n_out]."""
    w = params[prefix + ".w"]
    b = params[prefix + ".b"]
    out = nd.matmul(x, w)
    return nd.add(out, nd.broadcast_to(b, out.shape))


def layer_norm(params, prefix, x, eps=1e-5):
    """Normalize the last axis of a 2-D tensor, then scale and shift."""
    mean = nd.tmean(x, axis=1, keepdims=True)
    centered = nd.sub(x, nd.broadcast_to(mean, x.shape))
    var = nd.tmean(nd.mul(centered, centered), axis=1, keepdims=True)
    denom = nd.pow_const(nd.add(var, eps), 0.5)
    normed = nd.div(centered, nd.broadcast_to(denom, x.shape))
    g = nd.broadcast_to(params[prefix + ".g"], x.shape)
    b = nd.broadcast_to(params[prefix + ".b"], x.shape)
    return nd.add(nd.mul(normed, g), b)


def maybe_dropout(x, p, rng):
    if p and p > 0.0 and rng is not None:
        return nd.dropout(x, p, rng)
    return x


def concat_statics(dynamic_rows, static_row):
    """Append a static vector to every row of a 2-D tensor."""
    n = dynamic_rows.shape[0]
    tiled = nd.broadcast_to(
        nd.reshape(static_row, (1, static_row.shape[-1])),
        (n, static_row.shape[-1]),
    )
    return nd.concat([dynamic_rows, tiled], axis=1)
