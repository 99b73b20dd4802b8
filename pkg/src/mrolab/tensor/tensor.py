"""Minimal reverse-mode autodiff on float64 numpy arrays.

A ``Tensor`` wraps an ndarray plus an optional gradient accumulator. Every
operation builds a node of a dynamic graph; calling :meth:`Tensor.backward`
on a scalar result walks the graph in reverse topological order and
accumulates exact gradients into every reachable tensor that requires them.

Kept deliberately small: only the operations needed by a tiny Q-network and
a tiny causal transformer (dense algebra, gelu/relu, layer norm, softmax,
logsumexp, embeddings, masked attention and the usual losses).
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr


class Tensor:
    """Node of the computation graph: float64 values + gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False):
        self.data = _as_array(values)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- core graph machinery -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable gradient slot.

        Only defined for scalar results; non-scalar roots are rejected.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {self.data.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` back down to `shape` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(-g, b.data.shape))

    return _node(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy stacking rules; backward sums over broadcast dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul expects >=2-d operands, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.data.ndim == 2 and a.data.ndim > 2:
            # stacked activations against one weight matrix: fold the batch
            # into rows instead of summing many small products
            k, n = b.data.shape
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            b._accumulate(gb)
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _node(data, (a, b), backward)


# -- shape manipulation -------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        a._accumulate(g.reshape(a.data.shape))

    return _node(data, (a,), backward)


def transpose_last2(a) -> Tensor:
    a = as_tensor(a)
    data = np.swapaxes(a.data, -1, -2)

    def backward(g):
        a._accumulate(np.swapaxes(g, -1, -2))

    return _node(data, (a,), backward)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accumulate(piece)

    return _node(data, tuple(tensors), backward)


def take_axis1(a, indices) -> Tensor:
    """Select positions along axis 1 (x[:, indices, ...])."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    data = np.take(a.data, idx, axis=1)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (slice(None), idx), g)
        a._accumulate(full)

    return _node(data, (a,), backward)


# -- reductions ---------------------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.data.shape).copy())

    return _node(data, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    denom = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g / denom, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg / denom, a.data.shape).copy())

    return _node(data, (a,), backward)


# -- pointwise nonlinearities -------------------------------------------------


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    data = np.where(mask, a.data, 0.0)

    def backward(g):
        a._accumulate(g * mask)

    return _node(data, (a,), backward)


def gelu(a) -> Tensor:
    """Exact gelu: x * Phi(x) with the Gaussian CDF via erf."""
    a = as_tensor(a)
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    data = a.data * cdf

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * a.data * a.data)
        a._accumulate(g * (cdf + a.data * pdf))

    return _node(data, (a,), backward)


def square(a) -> Tensor:
    a = as_tensor(a)
    data = a.data * a.data

    def backward(g):
        a._accumulate(2.0 * g * a.data)

    return _node(data, (a,), backward)


def tabs(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    data = np.abs(a.data)

    def backward(g):
        a._accumulate(g * sign)

    return _node(data, (a,), backward)


# -- normalizations and log-space ops ------------------------------------------


def softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        a._accumulate(data * (g - dot))

    return _node(data, (a,), backward)


def logsumexp(a) -> Tensor:
    """log(sum(exp(x))) over the last axis (kept numerically stable)."""
    a = as_tensor(a)
    m = a.data.max(axis=-1, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=-1, keepdims=True)
    data = (m + np.log(s)).squeeze(-1)

    def backward(g):
        a._accumulate(np.expand_dims(g, -1) * (e / s))

    return _node(data, (a,), backward)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    n = a.data.shape[-1]
    if gain.data.shape != (n,) or bias.data.shape != (n,):
        raise ShapeError(f"layer_norm: gain/bias must have shape ({n},)")
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data

    def backward(g):
        gain._accumulate(_unbroadcast(g * xhat, gain.data.shape))
        bias._accumulate(_unbroadcast(g, bias.data.shape))
        gx = g * gain.data
        term = gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        a._accumulate(term * inv)

    return _node(data, (a, gain, bias), backward)


def embedding(table, indices) -> Tensor:
    """Row lookup into `table`; gradients scatter-add into the table."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError(f"embedding: index out of range for table of {table.data.shape[0]} rows")
    data = table.data[idx]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, table.data.shape[-1]))
        table._accumulate(full)

    return _node(data, (table,), backward)


def apply_causal_mask(scores) -> Tensor:
    """Set the strict upper triangle of the last two axes to -inf.

    Masked positions get exactly zero attention weight after softmax, so
    outputs at position i are bit-identical under any change of inputs at
    positions > i.
    """
    scores = as_tensor(scores)
    n = scores.data.shape[-1]
    if scores.data.shape[-2] != n:
        raise ShapeError(f"causal mask expects square last axes, got {scores.shape}")
    keep = np.tril(np.ones((n, n), dtype=bool))
    data = np.where(keep, scores.data, -np.inf)

    def backward(g):
        scores._accumulate(np.where(keep, g, 0.0))

    return _node(data, (scores,), backward)


def causal_attention(q, k, v) -> Tensor:
    """Scaled dot-product attention over (.., L, E) with a causal mask."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    e = q.data.shape[-1]
    if k.data.shape[-1] != e or v.data.shape[-2] != k.data.shape[-2]:
        raise ShapeError(f"attention: shapes {q.shape}, {k.shape}, {v.shape} do not conform")
    scores = mul(matmul(q, transpose_last2(k)), 1.0 / np.sqrt(e))
    weights = softmax(apply_causal_mask(scores))
    return matmul(weights, v)


# -- losses --------------------------------------------------------------------


def gather_last(a, indices) -> Tensor:
    """Pick one entry per row along the last axis (a[..., indices])."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.shape != a.data.shape[:-1]:
        raise ShapeError(f"gather_last: indices shape {idx.shape} vs data {a.shape}")
    data = np.take_along_axis(a.data, idx[..., None], axis=-1).squeeze(-1)

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, idx[..., None], g[..., None], axis=-1)
        a._accumulate(full)

    return _node(data, (a,), backward)


def cross_entropy_with_logits(logits, targets) -> Tensor:
    """Mean over rows of logsumexp(logits) - logit[target]."""
    logits = as_tensor(logits)
    per_row = sub(logsumexp(logits), gather_last(logits, targets))
    return tmean(per_row)


def mse(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mse: shapes {a.shape} and {b.shape} differ")
    return tmean(square(sub(a, b)))


def huber(a, b, delta: float = 1.0) -> Tensor:
    """Mean Huber loss between same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"huber: shapes {a.shape} and {b.shape} differ")
    diff = sub(a, b)
    small = np.abs(diff.data) <= delta
    quad = mul(square(diff), 0.5)
    lin = sub(mul(tabs(diff), delta), 0.5 * delta * delta)
    # piecewise select with a constant mask; the kink set has measure zero
    sel = add(mul(quad, small.astype(np.float64)), mul(lin, (~small).astype(np.float64)))
    return tmean(sel)
