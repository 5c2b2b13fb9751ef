"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the recommendation model needs are implemented. Values
are float64 arrays; gradients accumulate additively, so repeated backward
calls without zeroing add up.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    """A node in the computation tape.

    `value` is a numpy float64 array (0-d allowed). Constants built from
    plain numbers/arrays have no parents and never receive gradients.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def _binary(a, b, value, da, db):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate(_unbroadcast(da(g), a.value.shape))
        if b.requires_grad or b._parents:
            b.accumulate(_unbroadcast(db(g), b.value.shape))

    return Tensor(value, parents=(a, b), backward=backward)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.value + b.value, lambda g: g, lambda g: g)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.value - b.value, lambda g: g, lambda g: -g)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.value * b.value,
                   lambda g: g * b.value, lambda g: g * a.value)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.value / b.value,
                   lambda g: g / b.value,
                   lambda g: -g * a.value / (b.value * b.value))


def _unary(a, value, da):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate(da(g))

    return Tensor(value, parents=(a,), backward=backward)


def relu(a):
    a = as_tensor(a)
    # subgradient at 0 is 0
    mask = a.value > 0
    return _unary(a, np.where(mask, a.value, 0.0), lambda g: g * mask)


def sigmoid(a):
    a = as_tensor(a)
    v = np.empty_like(a.value)
    pos = a.value >= 0
    v[pos] = 1.0 / (1.0 + np.exp(-a.value[pos]))
    ex = np.exp(a.value[~pos])
    v[~pos] = ex / (1.0 + ex)
    return _unary(a, v, lambda g: g * v * (1.0 - v))


def log(a):
    a = as_tensor(a)
    return _unary(a, np.log(a.value), lambda g: g / a.value)


def softplus(a):
    a = as_tensor(a)
    v = np.logaddexp(0.0, a.value)
    s = np.empty_like(a.value)
    pos = a.value >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-a.value[pos]))
    ex = np.exp(a.value[~pos])
    s[~pos] = ex / (1.0 + ex)
    return _unary(a, v, lambda g: g * s)


def sqrt(a):
    a = as_tensor(a)
    v = np.sqrt(a.value)
    return _unary(a, v, lambda g: g / (2.0 * v))


def tsum(a):
    a = as_tensor(a)
    return _unary(a, np.sum(a.value), lambda g: np.broadcast_to(g, a.value.shape).copy())


def tmean(a):
    a = as_tensor(a)
    n = a.value.size
    return _unary(a, np.mean(a.value),
                  lambda g: np.broadcast_to(g / n, a.value.shape).copy())


def dot(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.value.shape != b.value.shape or a.value.ndim != 1:
        raise ShapeError(f"dot expects equal 1-d shapes, got {a.value.shape} vs {b.value.shape}")
    return _binary(a, b, np.dot(a.value, b.value),
                   lambda g: g * b.value, lambda g: g * a.value)


def concat(parts):
    parts = [as_tensor(p) for p in parts]
    for p in parts:
        if p.value.ndim != 1:
            raise ShapeError(f"concat expects 1-d parts, got shape {p.value.shape}")
    sizes = [p.value.size for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad or p._parents:
                p.accumulate(g[lo:hi])

    return Tensor(np.concatenate([p.value for p in parts]),
                  parents=tuple(parts), backward=backward)


def index(a, i):
    """Pick one element of a 1-d tensor as a 0-d tensor."""
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad or a._parents:
            buf = np.zeros_like(a.value)
            buf[i] = g
            a.accumulate(buf)

    return Tensor(a.value[i], parents=(a,), backward=backward)


def row(table, i):
    """Pick one row of a 2-d tensor (embedding lookup)."""
    table = as_tensor(table)
    if table.value.ndim != 2:
        raise ShapeError(f"row expects a 2-d table, got shape {table.value.shape}")

    def backward(g):
        if table.requires_grad or table._parents:
            buf = np.zeros_like(table.value)
            buf[i] = g
            table.accumulate(buf)

    return Tensor(table.value[i].copy(), parents=(table,), backward=backward)


def sum_normalize(a):
    """a / sum(a); an all-zero input yields the uniform distribution."""
    a = as_tensor(a)
    total = float(np.sum(a.value))
    if total == 0.0:
        n = a.value.size
        return Tensor(np.full(n, 1.0 / n))
    v = a.value / total

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate(g / total - np.dot(g, v) / total)

    return Tensor(v, parents=(a,), backward=backward)


def _pad_split(window):
    left = (window - 1) // 2
    return left, window - 1 - left


def conv1d(x, filters, bias):
    """'Same' 1-d convolution over the sequence axis.

    x: (n, d) sequence of vectors, filters: (m, w, d), bias: (m,).
    Output (n, m); the sequence is zero-padded so every position yields
    an output even when n < w.
    """
    x, filters, bias = as_tensor(x), as_tensor(filters), as_tensor(bias)
    n, d = x.value.shape
    m, w, dk = filters.value.shape
    if dk != d:
        raise ShapeError(f"conv1d channel mismatch: input {d}, filters {dk}")
    if bias.value.shape != (m,):
        raise ShapeError(f"conv1d bias shape {bias.value.shape}, expected ({m},)")
    left, right = _pad_split(w)
    xp = np.zeros((n + left + right, d))
    xp[left:left + n] = x.value
    windows = np.stack([xp[t:t + n] for t in range(w)], axis=1)  # (n, w, d)
    out = np.einsum("nwd,jwd->nj", windows, filters.value) + bias.value

    def backward(g):
        if filters.requires_grad or filters._parents:
            filters.accumulate(np.einsum("nj,nwd->jwd", g, windows))
        if bias.requires_grad or bias._parents:
            bias.accumulate(g.sum(axis=0))
        if x.requires_grad or x._parents:
            gxp = np.zeros_like(xp)
            for t in range(w):
                gxp[t:t + n] += g @ filters.value[:, t, :]
            x.accumulate(gxp[left:left + n])

    return Tensor(out, parents=(x, filters, bias), backward=backward)


def maxpool0(x):
    """Max over the sequence axis of an (n, m) tensor; ties send the
    gradient to the first maximal position."""
    x = as_tensor(x)
    if x.value.ndim != 2:
        raise ShapeError(f"maxpool0 expects a 2-d input, got shape {x.value.shape}")
    idx = np.argmax(x.value, axis=0)
    cols = np.arange(x.value.shape[1])
    out = x.value[idx, cols]

    def backward(g):
        if x.requires_grad or x._parents:
            buf = np.zeros_like(x.value)
            buf[idx, cols] = g
            x.accumulate(buf)

    return Tensor(out, parents=(x,), backward=backward)


def backward(loss):
    """Propagate gradients from a scalar loss through the recorded tape."""
    if loss.value.ndim != 0:
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.value.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.accumulate(np.asarray(1.0))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
