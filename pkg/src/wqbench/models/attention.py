"""Encoder-decoder attention model for single-step prediction.

The encoder ingests a long history window through three full-attention
blocks with 1-D convolutional distillation (kernel 3, stride 2) after
the first and second blocks, halving the sequence length each time.
The decoder ingests a short recent window plus a token for the
prediction day, runs two blocks of self-attention followed by
cross-attention over the encoder output, and a linear head reads the
prediction-day row after a final layer norm.  Static attributes are
concatenated to every token before embedding; positions are marked with
sinusoidal absolute encodings.
"""

import numpy as np

from .. import ndcore as nd
from ..errors import DimensionError
from .layers import (
    concat_statics,
    layer_norm,
    linear,
    linear_layout,
    maybe_dropout,
    norm_layout,
)

N_ENCODER_BLOCKS = 3
N_DECODER_BLOCKS = 2


def _attn_layout(prefix, h):
    entries = []
    for proj in ("wq", "wk", "wv", "wo"):
        entries.extend(linear_layout("%s.%s" % (prefix, proj), h, h))
    return entries


def layout(spec):
    h = spec.hidden
    ff = spec.ff_dim
    n_in = spec.n_dynamic_features + spec.n_static_features
    entries = []
    entries.extend(linear_layout("enc_embed", n_in, h))
    entries.extend(linear_layout("dec_embed", n_in, h))
    for i in range(N_ENCODER_BLOCKS):
        entries.extend(_attn_layout("enc%d.attn" % i, h))
        entries.extend(norm_layout("enc%d.ln1" % i, h))
        entries.extend(linear_layout("enc%d.ff.w1" % i, h, ff))
        entries.extend(linear_layout("enc%d.ff.w2" % i, ff, h))
        entries.extend(norm_layout("enc%d.ln2" % i, h))
    for i in range(N_ENCODER_BLOCKS - 1):
        entries.extend(linear_layout("conv%d" % i, 3 * h, h))
    for i in range(N_DECODER_BLOCKS):
        entries.extend(_attn_layout("dec%d.self" % i, h))
        entries.extend(norm_layout("dec%d.ln1" % i, h))
        entries.extend(_attn_layout("dec%d.cross" % i, h))
        entries.extend(norm_layout("dec%d.ln2" % i, h))
        entries.extend(linear_layout("dec%d.ff.w1" % i, h, ff))
        entries.extend(linear_layout("dec%d.ff.w2" % i, ff, h))
        entries.extend(norm_layout("dec%d.ln3" % i, h))
    entries.extend(norm_layout("final_ln", h))
    entries.extend(linear_layout("head", h, spec.n_targets))
    return entries


def sinusoidal_encoding(length, width):
    """Absolute positional encoding table [length, width]."""
    position = np.arange(length)[:, None].astype(float)
    half = (width + 1) // 2
    freq = np.exp(-np.log(10000.0) * (2.0 * np.arange(half) / width))
    angles = position * freq[None, :]
    table = np.zeros((length, 2 * half))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table[:, :width]


def _multi_head(params, prefix, spec, queries, keys, weights_out=None,
                rng=None, p=0.0):
    h = spec.hidden
    dh = h // spec.heads
    q = linear(params, prefix + ".wq", queries)
    k = linear(params, prefix + ".wk", keys)
    v = linear(params, prefix + ".wv", keys)
    heads = []
    scale = 1.0 / np.sqrt(dh)
    for i in range(spec.heads):
        qi = nd.narrow(q, 1, i * dh, dh)
        ki = nd.narrow(k, 1, i * dh, dh)
        vi = nd.narrow(v, 1, i * dh, dh)
        scores = nd.mul(nd.matmul(qi, nd.transpose(ki)), scale)
        attn = nd.softmax(scores, axis=1)
        if weights_out is not None:
            weights_out.append(attn.data.copy())
        heads.append(nd.matmul(attn, vi))
    merged = nd.concat(heads, axis=1)
    out = linear(params, prefix + ".wo", merged)
    return maybe_dropout(out, p, rng)


def _feed_forward(params, prefix, x, rng, p):
    inner = nd.gelu(linear(params, prefix + ".w1", x))
    inner = maybe_dropout(inner, p, rng)
    return linear(params, prefix + ".w2", inner)


def _distill(params, index, x):
    """1-D convolution, kernel 3, stride 2, zero padding 1, then GeLU."""
    t, h = x.shape
    zero = nd.Tensor(np.zeros((1, h)))
    padded = nd.concat([zero, x, zero], axis=0)
    n_out = (t - 1) // 2 + 1
    idx = []
    for p in range(n_out):
        base = 2 * p
        idx.extend((base, base + 1, base + 2))
    windows = nd.reshape(nd.take_rows(padded, idx), (n_out, 3 * h))
    return nd.gelu(linear(params, "conv%d" % index, windows))


def _encode(params, spec, tokens, rng, p, weights_out):
    x = tokens
    for i in range(N_ENCODER_BLOCKS):
        attn = _multi_head(params, "enc%d.attn" % i, spec, x, x,
                           weights_out=weights_out, rng=rng, p=p)
        x = layer_norm(params, "enc%d.ln1" % i, nd.add(x, attn))
        ff = _feed_forward(params, "enc%d.ff" % i, x, rng, p)
        x = layer_norm(params, "enc%d.ln2" % i, nd.add(x, ff))
        if i < N_ENCODER_BLOCKS - 1:
            x = _distill(params, i, x)
    return x


def _decode(params, spec, tokens, memory, rng, p, weights_out):
    x = tokens
    for i in range(N_DECODER_BLOCKS):
        attn = _multi_head(params, "dec%d.self" % i, spec, x, x,
                           weights_out=weights_out, rng=rng, p=p)
        x = layer_norm(params, "dec%d.ln1" % i, nd.add(x, attn))
        cross = _multi_head(params, "dec%d.cross" % i, spec, x, memory,
                            weights_out=weights_out, rng=rng, p=p)
        x = layer_norm(params, "dec%d.ln2" % i, nd.add(x, cross))
        ff = _feed_forward(params, "dec%d.ff" % i, x, rng, p)
        x = layer_norm(params, "dec%d.ln3" % i, nd.add(x, ff))
    return x


def forward_attention_sample(params, spec, history, recent, now, static,
                             rng=None, dropout_p=None, weights_out=None):
    """history: [seq_len, F_d]; recent: [W, F_d]; now: [F_d];
    static: [F_s] -> [n_targets]."""
    p = spec.dropout if dropout_p is None else dropout_p
    t, fd = history.shape
    if t != spec.seq_len:
        raise DimensionError(
            "expected %d history rows, got %d" % (spec.seq_len, t)
        )
    if fd != spec.n_dynamic_features:
        raise DimensionError(
            "expected %d dynamic features, got %d"
            % (spec.n_dynamic_features, fd)
        )
    if recent.shape[0] != spec.decoder_window:
        raise DimensionError(
            "expected %d recent rows, got %d"
            % (spec.decoder_window, recent.shape[0])
        )

    now_row = nd.reshape(now, (1, fd))
    enc_in = concat_statics(history, static)
    dec_in = concat_statics(nd.concat([recent, now_row], axis=0), static)

    h = spec.hidden
    enc = linear(params, "enc_embed", enc_in)
    enc = nd.add(enc, nd.Tensor(sinusoidal_encoding(t, h)))
    enc = maybe_dropout(enc, p, rng)
    dec = linear(params, "dec_embed", dec_in)
    dec = nd.add(dec, nd.Tensor(sinusoidal_encoding(dec.shape[0], h)))
    dec = maybe_dropout(dec, p, rng)

    memory = _encode(params, spec, enc, rng, p, weights_out)
    decoded = _decode(params, spec, dec, memory, rng, p, weights_out)
    decoded = layer_norm(params, "final_ln", decoded)
    last = nd.narrow(decoded, 0, decoded.shape[0] - 1, 1)
    out = linear(params, "head", last)
    return nd.reshape(out, (spec.n_targets,))


def forward_attention_batch(params, spec, history, recent, now, static,
                            rng=None, dropout_p=None):
    """history: [B, T, F]; recent: [B, W, F]; now: [B, F];
    static: [B, F_s] -> [B, n_targets]."""
    history = history if isinstance(history, nd.Tensor) else nd.Tensor(history)
    recent = recent if isinstance(recent, nd.Tensor) else nd.Tensor(recent)
    now = now if isinstance(now, nd.Tensor) else nd.Tensor(now)
    static = static if isinstance(static, nd.Tensor) else nd.Tensor(static)
    b, t, fd = history.shape
    w = recent.shape[1]
    rows = []
    for s in range(b):
        out = forward_attention_sample(
            params,
            spec,
            nd.reshape(nd.narrow(history, 0, s, 1), (t, fd)),
            nd.reshape(nd.narrow(recent, 0, s, 1), (w, fd)),
            nd.reshape(nd.narrow(now, 0, s, 1), (fd,)),
            nd.reshape(nd.narrow(static, 0, s, 1), (static.shape[1],)),
            rng=rng,
            dropout_p=dropout_p,
        )
        rows.append(nd.reshape(out, (1, spec.n_targets)))
    return nd.concat(rows, axis=0)


def forward_attention(model, history, recent, now, static, rng=None,
                      dropout_p=None, with_weights=False):
    """Single-sample forward; optionally also returns attention maps."""
    def wrap(x):
        return x if isinstance(x, nd.Tensor) else nd.Tensor(x)

    weights = [] if with_weights else None
    out = forward_attention_sample(
        model.parameters, model.spec, wrap(history), wrap(recent),
        wrap(now), wrap(static), rng=rng, dropout_p=dropout_p,
        weights_out=weights,
    )
    if with_weights:
        return out, weights
    return out
