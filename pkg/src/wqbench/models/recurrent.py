"""Stacked LSTM over a daily window, predicting at the final timestep.

Static attributes are concatenated to every timestep's feature vector.
Each layer carries one bias vector (so the per-layer parameter count is
the textbook 4*(h*(input+h)+h)), dropout is applied between layers, and
the multi-task head reads the final hidden state of the top layer.
"""

import numpy as np

from .. import ndcore as nd
from ..errors import DimensionError
from .layers import concat_statics, linear, linear_layout, maybe_dropout


def layout(spec):
    h = spec.hidden
    entries = []
    n_in = spec.n_dynamic_features + spec.n_static_features
    for l in range(spec.layers):
        entries.append(
            ("lstm%d.w_ih" % l, (n_in, 4 * h), ("uniform", h))
        )
        entries.append(("lstm%d.w_hh" % l, (h, 4 * h), ("uniform", h)))
        entries.append(("lstm%d.b" % l, (4 * h,), ("uniform", h)))
        n_in = h
    entries.extend(linear_layout("head", h, spec.n_targets))
    return entries


def _gates(params, layer, x, h):
    z = nd.add(
        nd.matmul(x, params["lstm%d.w_ih" % layer]),
        nd.matmul(h, params["lstm%d.w_hh" % layer]),
    )
    b = params["lstm%d.b" % layer]
    z = nd.add(z, nd.broadcast_to(b, z.shape))
    width = b.shape[0] // 4
    i = nd.sigmoid(nd.narrow(z, 1, 0, width))
    f = nd.sigmoid(nd.narrow(z, 1, width, width))
    g = nd.tanh(nd.narrow(z, 1, 2 * width, width))
    o = nd.sigmoid(nd.narrow(z, 1, 3 * width, width))
    return i, f, g, o


def forward_recurrent_batch(params, spec, dynamic, static, rng=None,
                            dropout_p=None):
    """dynamic: [B, seq_len, F_d]; static: [B, F_s] -> [B, n_targets]."""
    dynamic = dynamic if isinstance(dynamic, nd.Tensor) else nd.Tensor(dynamic)
    static = static if isinstance(static, nd.Tensor) else nd.Tensor(static)
    b, t, fd = dynamic.shape
    if t != spec.seq_len:
        raise DimensionError(
            "expected %d timesteps, got %d" % (spec.seq_len, t)
        )
    if fd != spec.n_dynamic_features:
        raise DimensionError(
            "expected %d dynamic features, got %d"
            % (spec.n_dynamic_features, fd)
        )
    p = spec.dropout if dropout_p is None else dropout_p
    h = spec.hidden
    zeros = nd.Tensor(np.zeros((b, h)))
    steps = [
        nd.reshape(nd.narrow(dynamic, 1, step, 1), (b, fd))
        for step in range(t)
    ]
    layer_inputs = [nd.concat([x, static], axis=1) for x in steps]
    final_h = None
    for layer in range(spec.layers):
        hs = zeros
        cs = zeros
        outputs = []
        for x in layer_inputs:
            i, f, g, o = _gates(params, layer, x, hs)
            cs = nd.add(nd.mul(f, cs), nd.mul(i, g))
            hs = nd.mul(o, nd.tanh(cs))
            outputs.append(hs)
        final_h = hs
        if layer < spec.layers - 1:
            layer_inputs = [maybe_dropout(hh, p, rng) for hh in outputs]
    return linear(params, "head", final_h)


def forward_recurrent(model, dynamic, static, rng=None, dropout_p=None):
    """dynamic: [seq_len, F_d]; static: [F_s] -> [n_targets]."""
    dynamic = dynamic if isinstance(dynamic, nd.Tensor) else nd.Tensor(dynamic)
    static = static if isinstance(static, nd.Tensor) else nd.Tensor(static)
    if len(dynamic.shape) != 2:
        raise DimensionError("dynamic input must be [seq_len, features]")
    t, fd = dynamic.shape
    batched = nd.reshape(dynamic, (1, t, fd))
    srow = nd.reshape(static, (1, static.shape[-1]))
    out = forward_recurrent_batch(
        model.parameters, model.spec, batched, srow, rng=rng,
        dropout_p=dropout_p,
    )
    return nd.reshape(out, (model.spec.n_targets,))
