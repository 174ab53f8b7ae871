"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Tensors wrap numpy arrays (float64 for verification, float32 for training).
Every op that participates in differentiation records its parents and a
backward closure; `backward()` walks the tape in reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class AutodiffError(ValueError):
    """Raised on contract violations (shape mismatch, non-finite input, ...)."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind not in "fiu":
            raise AutodiffError(f"unsupported dtype {arr.dtype}")
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return pow_(self, p)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def backward(self) -> None:
        """Reverse-mode pass from a scalar; accumulates into `.grad` of leaves."""
        if self.size != 1:
            raise AutodiffError(f"backward requires a scalar loss, got shape {self.shape}")
        order = _toposort(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad = node.grad + g
            if node._backward is None:
                continue
            for parent, pg in node._backward(g):
                if not _needs_grad(parent):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _toposort(root: Tensor) -> list[Tensor]:
    # iterative DFS; graphs can be deep (per-layer chains over many batches)
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if any(_needs_grad(p) for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce `grad` back to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise / arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def bw(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))

    return _make(out, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def bw(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape)))

    return _make(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bw(g):
        return ((a, _unbroadcast(g * b.data, a.shape)), (b, _unbroadcast(g * a.data, b.shape)))

    return _make(out, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def bw(g):
        return (
            (a, _unbroadcast(g / b.data, a.shape)),
            (b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
        )

    return _make(out, (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        return ((a, -g),)

    return _make(-a.data, (a,), bw)


def pow_(a, p: float) -> Tensor:
    a = as_tensor(a)
    out = a.data ** p

    def bw(g):
        return ((a, g * p * a.data ** (p - 1)),)

    return _make(out, (a,), bw)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def bw(g):
        return ((a, g * out),)

    return _make(out, (a,), bw)


def log(a) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        return ((a, g / a.data),)

    return _make(np.log(a.data), (a,), bw)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def bw(g):
        return ((a, g * mask),)

    return _make(np.where(mask, a.data, 0.0), (a,), bw)


# ---------------------------------------------------------------------------
# linear algebra / shape


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise AutodiffError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bw(g):
        # promote 1-D operands to row/column matrices for the adjoint products
        a_ = a.data[None, :] if a.ndim == 1 else a.data
        b_ = b.data[:, None] if b.ndim == 1 else b.data
        g_ = g
        if b.ndim == 1:
            g_ = g_[..., None]
        if a.ndim == 1:
            g_ = g_[..., None, :]
        ga = g_ @ np.swapaxes(b_, -1, -2)
        gb = np.swapaxes(a_, -1, -2) @ g_
        if a.ndim == 1:
            ga = ga.reshape(ga.shape[:-2] + (ga.shape[-1],))
        if b.ndim == 1:
            gb = gb.reshape(gb.shape[:-2] + (gb.shape[-2],))
        return ((a, _unbroadcast(ga, a.shape)), (b, _unbroadcast(gb, b.shape)))

    return _make(out, (a, b), bw)


def linear_map(x, W, b=None) -> Tensor:
    """y = x @ W (+ b); leading batch axes of x preserved."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise AutodiffError(f"linear_map: C_in mismatch {x.shape[-1]} vs {W.shape[0]}")
    y = matmul(x, W)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise AutodiffError(f"linear_map: bias shape {b.shape} != ({W.shape[1]},)")
        y = add(y, b)
    return y


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape

    def bw(g):
        return ((a, g.reshape(old)),)

    return _make(a.data.reshape(shape), (a,), bw)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        return ((a, g.transpose(inv)),)

    return _make(a.data.transpose(axes), (a,), bw)


def concat(tensors: Iterable[Tensor], axis: int) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    out = np.concatenate([t.data for t in ts], axis=axis)
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(zip(ts, pieces))

    return _make(out, ts, bw)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.shape).copy()),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.shape).copy()),)

    return _make(out, (a,), bw)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        n = a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def slice_axis(a, axis: int, start=None, stop=None, step=None) -> Tensor:
    a = as_tensor(a)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop, step)
    idx = tuple(idx)

    def bw(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return ((a, full),)

    return _make(a.data[idx].copy(), (a,), bw)


def pad_axis(a, axis: int, before: int, after: int) -> Tensor:
    a = as_tensor(a)
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(before, before + a.shape[axis])
    idx = tuple(idx)

    def bw(g):
        return ((a, g[idx]),)

    return _make(np.pad(a.data, widths), (a,), bw)


# ---------------------------------------------------------------------------
# softmax family


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if x.shape[axis] < 1:
        raise AutodiffError("softmax over an empty axis")
    if not np.isfinite(x.data).all():
        raise AutodiffError("softmax received non-finite input")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((x, out * (g - dot)),)

    return _make(out, (x,), bw)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if not np.isfinite(x.data).all():
        raise AutodiffError("log_softmax received non-finite input")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def bw(g):
        return ((x, g - np.exp(out) * g.sum(axis=axis, keepdims=True)),)

    return _make(out, (x,), bw)


# ---------------------------------------------------------------------------
# temporal convolution (1 x K kernel over the time axis of (N, C, T, V))


def temporal_conv(x, w, b=None, stride: int = 1) -> Tensor:
    """Same-padded 1xK convolution along axis 2 of x:(N,C,T,V), w:(C_out,C_in,K)."""
    x, w = as_tensor(x), as_tensor(w)
    n, c, t, v = x.shape
    c_out, c_in, k = w.shape
    if c_in != c:
        raise AutodiffError(f"temporal_conv: channel mismatch {c} vs {c_in}")
    if k % 2 != 1:
        raise AutodiffError("temporal_conv: kernel size must be odd")
    if stride not in (1, 2):
        raise AutodiffError(f"temporal_conv: stride must be 1 or 2, got {stride}")
    pad = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (0, 0)))
    t_out = (t + stride - 1) // stride
    # cols[j] = window slice j, shape (N, C, T_out, V)
    cols = np.stack(
        [xp[:, :, j : j + stride * t_out : stride, :] for j in range(k)], axis=0
    )
    out = np.einsum("ock,knctv->notv", w.data, cols, optimize=True)
    if b is not None:
        b = as_tensor(b)
        out = out + b.data[None, :, None, None]

    def bw(g):
        grads = []
        gw = np.einsum("notv,knctv->ock", g, cols, optimize=True)
        gxp = np.zeros_like(xp)
        gcols = np.einsum("ock,notv->knctv", w.data, g, optimize=True)
        for j in range(k):
            gxp[:, :, j : j + stride * t_out : stride, :] += gcols[j]
        gx = gxp[:, :, pad : pad + t, :]
        grads.append((x, gx))
        grads.append((w, gw))
        if b is not None:
            grads.append((b, g.sum(axis=(0, 2, 3))))
        return tuple(grads)

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, bw)


# ---------------------------------------------------------------------------
# gradient checking


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` must be a scalar-valued function of `x` that rebuilds its graph on
    every call. Error metric per coordinate: |analytic - numeric| / max(1, |analytic|).
    """
    x.requires_grad = True
    x.grad = None
    out = f(x)
    if out.size != 1:
        raise AutodiffError("finite_diff_check requires a scalar-valued function")
    out.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    flat = x.data.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x).data)
        flat[i] = orig - h
        fm = float(f(x).data)
        flat[i] = orig
        numeric = (fp - fm) / (2 * h)
        a = analytic.reshape(-1)[i]
        err = abs(a - numeric) / max(1.0, abs(a))
        worst = max(worst, err)
    return worst
