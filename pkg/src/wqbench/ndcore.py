"""Reverse-mode automatic differentiation over dense float64 tensors.

A :class:`Tensor` wraps a numpy array.  Operations executed while a
:class:`Tape` is active record themselves onto the tape; calling
``tape.backward(loss)`` walks the recorded nodes once in reverse order and
accumulates gradients into the ``grad`` field of the leaf tensors that were
created with ``requires_grad=True``.

The op set is deliberately small: elementwise arithmetic and activations,
2-D matrix multiplication, reductions, and a handful of shape ops (narrow,
take, concat, broadcast) that are enough to express the model families in
:mod:`wqbench.models`.  Elementwise binary ops accept equal shapes or a
scalar on one side; anything else must go through an explicit
:func:`broadcast_to`, which keeps every backward rule local and obvious.

Tapes are kept on a thread-local stack, so independent tapes may run in
parallel threads without sharing state.  A single tape is not thread-safe.
"""

import math
import threading

import numpy as np

from .errors import ContractError, DimensionError, DomainError

_GELU_C = math.sqrt(2.0 / math.pi)
# tanh approximation of the Gaussian error function; 0.044715 is the
# standard cubic correction coefficient.
_GELU_CUBIC = 0.044715

_LEAKY_SLOPE = 0.01

_state = threading.local()


def _tape_stack():
    if not hasattr(_state, "stack"):
        _state.stack = []
    return _state.stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense float64 array with an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "tape")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (
            self.shape,
            self.requires_grad,
        )

    def item(self):
        if self.data.size != 1:
            raise ContractError("item() requires a single-element tensor")
        return float(self.data.reshape(-1)[0])

    # operator sugar; scalars are wrapped on the fly
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class _Node:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of operations; supports one backward pass per loss.

    Nodes are appended in execution order, so iterating the list in
    reverse is a valid topological order: every node's inputs were created
    before the node itself.  Repeated ``backward`` calls without clearing
    ``grad`` on the leaves accumulate, which is the behaviour gradient
    descent wants.
    """

    def __init__(self):
        self.nodes = []
        self._produced = set()

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise ContractError("tape stack corrupted: exiting a non-top tape")
        stack.pop()
        return False

    def _add(self, node):
        self.nodes.append(node)
        self._produced.add(id(node.output))
        node.output.tape = self

    def backward(self, loss):
        if not isinstance(loss, Tensor):
            raise ContractError("backward expects a Tensor loss")
        if loss.data.size != 1:
            raise ContractError("backward expects a scalar loss")
        if loss.tape is not self:
            raise ContractError("loss was not recorded on this tape")
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            g_inputs = node.backward_fn(g_out)
            for tensor, g in zip(node.inputs, g_inputs):
                if g is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                elif id(tensor) in self._produced:
                    grads[key] = g
                else:
                    # leaf: accumulate into the public grad field
                    if tensor.grad is None:
                        tensor.grad = np.zeros_like(tensor.data)
                    tensor.grad = tensor.grad + g


def backward(loss):
    """Run the backward pass on the tape that recorded ``loss``."""
    if not isinstance(loss, Tensor) or loss.tape is None:
        raise ContractError("loss is not attached to an active tape")
    loss.tape.backward(loss)


def _record(output, inputs, backward_fn):
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        tape._add(_Node(tuple(inputs), output, backward_fn))
    return output


def _binary_shapes(a, b, op):
    # equal shapes, or a scalar on either side; anything else is a
    # deliberate DimensionError so broadcasting stays explicit
    if a.data.shape == b.data.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    raise DimensionError(
        "%s: incompatible shapes %s and %s (use broadcast_to for "
        "non-scalar broadcasting)" % (op, a.data.shape, b.data.shape)
    )


def _reduce_for(operand, grad):
    # when one side of a binary op was a scalar, its gradient is the sum
    # of the elementwise gradient
    if operand.data.shape == grad.shape:
        return grad
    return np.sum(grad).reshape(operand.data.shape)


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _binary_shapes(a, b, "add")
    out = Tensor(a.data + b.data)

    def bwd(g):
        return _reduce_for(a, g), _reduce_for(b, g)

    return _record(out, (a, b), bwd)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _binary_shapes(a, b, "sub")
    out = Tensor(a.data - b.data)

    def bwd(g):
        return _reduce_for(a, g), _reduce_for(b, -g)

    return _record(out, (a, b), bwd)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    _binary_shapes(a, b, "mul")
    out = Tensor(a.data * b.data)

    def bwd(g):
        return _reduce_for(a, g * b.data), _reduce_for(b, g * a.data)

    return _record(out, (a, b), bwd)


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    _binary_shapes(a, b, "div")
    out = Tensor(a.data / b.data)

    def bwd(g):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _reduce_for(a, ga), _reduce_for(b, gb)

    return _record(out, (a, b), bwd)


def neg(a):
    a = _wrap(a)
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def exp(a):
    a = _wrap(a)
    out = Tensor(np.exp(a.data))
    return _record(out, (a,), lambda g: (g * out.data,))


def log(a):
    a = _wrap(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log requires strictly positive inputs")
    out = Tensor(np.log(a.data))
    return _record(out, (a,), lambda g: (g / a.data,))


def tanh(a):
    a = _wrap(a)
    out = Tensor(np.tanh(a.data))
    return _record(out, (a,), lambda g: (g * (1.0 - out.data * out.data),))


def sigmoid(a):
    a = _wrap(a)
    out = Tensor(1.0 / (1.0 + np.exp(-a.data)))
    return _record(out, (a,), lambda g: (g * out.data * (1.0 - out.data),))


def gelu(a):
    a = _wrap(a)
    x = a.data
    inner = _GELU_C * (x + _GELU_CUBIC * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t))

    def bwd(g):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_CUBIC * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    return _record(out, (a,), bwd)


def leaky_relu(a, slope=_LEAKY_SLOPE):
    a = _wrap(a)
    out = Tensor(np.where(a.data > 0.0, a.data, slope * a.data))

    def bwd(g):
        return (g * np.where(a.data > 0.0, 1.0, slope),)

    return _record(out, (a,), bwd)


def pow_const(a, exponent):
    a = _wrap(a)
    p = float(exponent)
    out = Tensor(a.data**p)

    def bwd(g):
        return (g * p * a.data ** (p - 1.0),)

    return _record(out, (a,), bwd)


def sqrt(a):
    return pow_const(a, 0.5)


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "exp": exp,
    "log": log,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "gelu": gelu,
    "leaky_relu": leaky_relu,
}


def elementwise(op, a, b=None):
    """Dispatch an elementwise op by name.

    Binary ops require ``b``; unary ops require ``b`` to be omitted.
    """
    if op not in _ELEMENTWISE:
        raise ContractError("unknown elementwise op %r" % (op,))
    fn = _ELEMENTWISE[op]
    if op in ("add", "sub", "mul", "div"):
        if b is None:
            raise ContractError("%s requires two operands" % op)
        return fn(a, b)
    if b is not None:
        raise ContractError("%s takes a single operand" % op)
    return fn(a)


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError("matmul requires 2-D operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            "matmul: inner dimensions differ (%s vs %s)"
            % (a.data.shape, b.data.shape)
        )
    out = Tensor(a.data @ b.data)

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _record(out, (a, b), bwd)


def tsum(a, axis=None, keepdims=False):
    a = _wrap(a)
    out = Tensor(np.sum(a.data, axis=axis, keepdims=keepdims))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _record(out, (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    a = _wrap(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def broadcast_to(a, shape):
    """Explicitly expand ``a`` to ``shape``; gradient sums the expansion."""
    a = _wrap(a)
    shape = tuple(int(s) for s in shape)
    try:
        expanded = np.broadcast_to(a.data, shape)
    except ValueError as e:
        raise DimensionError(
            "cannot broadcast %s to %s" % (a.data.shape, shape)
        ) from e
    out = Tensor(expanded.copy())

    def bwd(g):
        src = a.data.shape
        gg = g
        # sum over prepended axes, then over axes expanded from size 1
        extra = len(shape) - len(src)
        if extra:
            gg = gg.sum(axis=tuple(range(extra)))
        keep = tuple(
            i for i, s in enumerate(src) if s == 1 and gg.shape[i] != 1
        )
        if keep:
            gg = gg.sum(axis=keep, keepdims=True)
        return (gg.reshape(src),)

    return _record(out, (a,), bwd)


def reshape(a, shape):
    a = _wrap(a)
    out = Tensor(a.data.reshape(shape))

    def bwd(g):
        return (g.reshape(a.data.shape),)

    return _record(out, (a,), bwd)


def transpose(a):
    a = _wrap(a)
    if a.data.ndim != 2:
        raise DimensionError("transpose requires a 2-D tensor")
    out = Tensor(a.data.T.copy())
    return _record(out, (a,), lambda g: (g.T.copy(),))


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ContractError("concat requires at least one tensor")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        pieces = []
        for i in range(len(tensors)):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    return _record(out, tuple(tensors), bwd)


def narrow(a, axis, start, length):
    """Contiguous slice along one axis; gradient zero-pads the rest."""
    a = _wrap(a)
    if axis >= a.data.ndim:
        raise DimensionError("narrow axis out of range")
    if start < 0 or start + length > a.data.shape[axis]:
        raise DimensionError("narrow slice out of bounds")
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    out = Tensor(a.data[tuple(sl)].copy())

    def bwd(g):
        full = np.zeros_like(a.data)
        full[tuple(sl)] = g
        return (full,)

    return _record(out, (a,), bwd)


def take_rows(a, indices):
    """Gather rows of a 2-D tensor; gradient scatter-adds."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise DimensionError("take_rows requires a 2-D tensor")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise DimensionError("take_rows index out of bounds")
    out = Tensor(a.data[idx].copy())

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record(out, (a,), bwd)


def dropout(a, p, rng):
    """Inverted dropout: zero with probability ``p``, scale by 1/(1-p)."""
    a = _wrap(a)
    if not 0.0 <= p < 1.0:
        raise DomainError("dropout probability must lie in [0, 1)")
    if p == 0.0:
        return a
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    out = Tensor(a.data * mask)
    return _record(out, (a,), lambda g: (g * mask,))


def softmax(a, axis=-1):
    """Numerically stable softmax built from primitive ops.

    The subtracted row maximum is detached; softmax is shift invariant so
    this does not change the gradient.
    """
    a = _wrap(a)
    shift = np.max(a.data, axis=axis, keepdims=True)
    e = exp(sub(a, Tensor(np.broadcast_to(shift, a.data.shape).copy())))
    denom = tsum(e, axis=axis, keepdims=True)
    return div(e, broadcast_to(denom, a.data.shape))


def stop_gradient(a):
    """Detach a tensor from the tape."""
    a = _wrap(a)
    return Tensor(a.data.copy())
