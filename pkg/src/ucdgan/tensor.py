"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array plus an optional gradient slot. Ops record
their parents and a backward closure; ``backward`` on a scalar root walks
the recorded graph once in reverse topological order, accumulating grads
additively into every leaf that requires them. The tape lives only as long
as the output tensors, so each training step rebuilds it from scratch.
"""

import contextlib
import math

import numpy as np

from .errors import ContractError, DomainError, ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (probe / teacher passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_err(self)

    def detach(self):
        """Same values, cut from the graph; gradients never flow through."""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, _lift(-1.0))

    def __sub__(self, other):
        return add(self, -_lift(other))

    def __rsub__(self, other):
        return add(_lift(other), -self)

    def __getitem__(self, idx):
        return take(self, idx)

    def matmul(self, other):
        return matmul(self, other)

    def leaky_relu(self, alpha=0.2):
        return leaky_relu(self, alpha)

    def relu(self):
        return leaky_relu(self, 0.0)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def softplus(self):
        return softplus(self)

    def log(self):
        return log(self)

    def exp(self):
        return exp(self)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def softmax(self, axis=-1):
        return softmax(self, axis)

    def log_sum_exp(self, axis=-1):
        return log_sum_exp(self, axis)


def _scalar_err(t):
    raise ContractError(f"item() needs a scalar tensor, got shape {t.data.shape}")


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, op, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(g, shape):
    """Sum g down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b):
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), "add", backward)


def mul(a, b):
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), "mul", backward)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shapes {a.data.shape} and {b.data.shape} do not conform")
    data = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), "matmul", backward)


def leaky_relu(x, alpha=0.2):
    slope = np.where(x.data > 0.0, 1.0, alpha)
    data = x.data * slope

    def backward(g):
        _accum(x, g * slope)

    return _node(data, (x,), "leaky_relu", backward)


def tanh(x):
    y = np.tanh(x.data)

    def backward(g):
        _accum(x, g * (1.0 - y * y))

    return _node(y, (x,), "tanh", backward)


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x):
    y = _sigmoid(x.data)

    def backward(g):
        _accum(x, g * y * (1.0 - y))

    return _node(y, (x,), "sigmoid", backward)


def softplus(x):
    # log(1 + e^v) without overflow for large |v|
    v = x.data
    data = np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))

    def backward(g):
        _accum(x, g * _sigmoid(v))

    return _node(data, (x,), "softplus", backward)


def log(x):
    if np.any(x.data <= 0.0):
        raise DomainError(f"log: non-positive input (min {x.data.min()!r})")
    data = np.log(x.data)

    def backward(g):
        _accum(x, g / x.data)

    return _node(data, (x,), "log", backward)


def exp(x):
    y = np.exp(x.data)

    def backward(g):
        _accum(x, g * y)

    return _node(y, (x,), "exp", backward)


def sum_(x, axis=None):
    data = x.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            _accum(x, np.broadcast_to(g, x.data.shape))
        else:
            _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape))

    return _node(data, (x,), "sum", backward)


def mean(x, axis=None):
    count = x.data.size if axis is None else x.data.shape[axis]
    data = x.data.mean(axis=axis)

    def backward(g):
        if axis is None:
            _accum(x, np.broadcast_to(g / count, x.data.shape))
        else:
            _accum(x, np.broadcast_to(np.expand_dims(g / count, axis), x.data.shape))

    return _node(data, (x,), "mean", backward)


def stack(tensors, axis=0):
    tensors = [_lift(t) for t in tensors]
    shapes = {t.data.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack: mismatched shapes {sorted(shapes)}")
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        for i, t in enumerate(tensors):
            _accum(t, np.take(g, i, axis=axis))

    return _node(data, tuple(tensors), "stack", backward)


def concat(tensors, axis=1):
    tensors = [_lift(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: shapes {[t.data.shape for t in tensors]} do not concatenate on axis {axis}")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _node(data, tuple(tensors), "concat", backward)


def take(x, idx):
    data = x.data[idx]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        _accum(x, full)

    return _node(data, (x,), "slice", backward)


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        _accum(x, (g - inner) * y)

    return _node(y, (x,), "softmax", backward)


def log_sum_exp(x, axis=-1):
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    s = e.sum(axis=axis, keepdims=True)
    data = np.squeeze(m + np.log(s), axis=axis)

    def backward(g):
        _accum(x, np.expand_dims(g, axis) * (e / s))

    return _node(data, (x,), "log_sum_exp", backward)


def backward(root):
    """Populate grads of every requires_grad leaf reachable from a scalar root."""
    if root.data.size != 1:
        raise ContractError(f"backward: root must be scalar, got shape {root.data.shape}")
    if not root.requires_grad:
        return

    topo = []
    seen = set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
