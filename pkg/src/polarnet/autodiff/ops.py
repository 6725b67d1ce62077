"""Differentiable primitives.

Every function here is a thin wrapper around ``apply`` with a private
``_fwd`` returning ``(value, vjp)``. Non-smooth primitives follow two
conventions: the subgradient at an exact tie is 0, and phase wrapping is
locally the identity.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels
from .tape import Var, apply, as_var, record_branch

TWO_PI = 2.0 * np.pi


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def _add(a, b):
    return a + b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))


def _sub(a, b):
    return a - b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))


def _mul(a, b):
    return a * b, lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))


def _div(a, b):
    out = a / b
    return out, lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * out / b, b.shape))


def _neg(a):
    return -a, lambda g: (-g,)


def _exp(a):
    out = np.exp(a)
    return out, lambda g: (g * out,)


def _log(a):
    return np.log(a), lambda g: (g / a,)


def _square(a):
    return a * a, lambda g: (2.0 * g * a,)


def _sqrt(a):
    out = np.sqrt(a)

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(out > 0, 0.5 / out, 0.0)
        return (g * d,)

    return out, vjp


def _cos(a):
    return np.cos(a), lambda g: (-g * np.sin(a),)


def _sin(a):
    return np.sin(a), lambda g: (g * np.cos(a),)


def _maximum(a, floor):
    mask = a > floor
    record_branch(lambda: mask.copy())
    return np.where(mask, a, floor), lambda g: (g * mask,)


def _wrap(a):
    """Wrap onto (-pi, pi]; gradient is the identity."""
    k = np.ceil((a - np.pi) / TWO_PI)
    out = np.where(k == 0, a, a - TWO_PI * k)
    out = np.where(out <= -np.pi, out + TWO_PI, out)
    out = np.where(out > np.pi, out - TWO_PI, out)
    record_branch(lambda: np.rint((a - out) / TWO_PI).astype(np.int8))
    return out, lambda g: (g,)


def _manifold_distance(dl, dth):
    """sqrt(dl^2 + 2 dth^2); gradient 0 where the distance vanishes."""
    out = np.sqrt(dl * dl + 2.0 * dth * dth)

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(out > 0, 1.0 / out, 0.0)
        gi = g * inv
        return _unbroadcast(gi * dl, dl.shape), _unbroadcast(2.0 * gi * dth, dth.shape)

    return out, vjp


def add(a, b) -> Var:
    return apply(_add, a, b)


def sub(a, b) -> Var:
    return apply(_sub, a, b)


def mul(a, b) -> Var:
    return apply(_mul, a, b)


def div(a, b) -> Var:
    return apply(_div, a, b)


def neg(a) -> Var:
    return apply(_neg, a)


def exp(a) -> Var:
    return apply(_exp, a)


def log(a) -> Var:
    return apply(_log, a)


def square(a) -> Var:
    return apply(_square, a)


def sqrt(a) -> Var:
    return apply(_sqrt, a)


def cos(a) -> Var:
    return apply(_cos, a)


def sin(a) -> Var:
    return apply(_sin, a)


def maximum(a, floor: float = 0.0) -> Var:
    return apply(_maximum, a, floor=float(floor))


def relu(a) -> Var:
    return apply(_maximum, a, floor=0.0)


def wrap(a) -> Var:
    return apply(_wrap, a)


def manifold_distance(dl, dth) -> Var:
    return apply(_manifold_distance, dl, dth)


# ---------------------------------------------------------------- reductions / shape

def _sum(a, axis=None, keepdims=False):
    out = a.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return out, vjp


def _mean(a, axis=None, keepdims=False):
    out = a.mean(axis=axis, keepdims=keepdims)
    n = a.size // max(out.size, 1)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, a.shape),)

    return out, vjp


def _reshape(a, shape):
    return a.reshape(shape), lambda g: (g.reshape(a.shape),)


def _transpose(a, axes=None):
    out = np.transpose(a, axes)
    inv = None if axes is None else np.argsort(axes)
    return out, lambda g: (np.transpose(g, inv),)


def _getitem(a, idx):
    def vjp(g):
        ga = np.zeros_like(a)
        np.add.at(ga, idx, g)
        return (ga,)

    return a[idx], vjp


def _concat(*xs, axis=0):
    sizes = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return np.concatenate(xs, axis=axis), lambda g: tuple(np.split(g, sizes, axis=axis))


def _pad(a, widths):
    slices = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return np.pad(a, widths), lambda g: (g[slices],)


def _max_reduce(a, axis):
    idx = np.argmax(a, axis=axis)
    record_branch(lambda: idx.copy())
    out = np.take_along_axis(a, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def vjp(g):
        ga = np.zeros_like(a)
        np.put_along_axis(ga, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (ga,)

    return out, vjp


def sum(a, axis=None, keepdims=False) -> Var:  # noqa: A001 - mirrors numpy
    return apply(_sum, a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims=False) -> Var:
    return apply(_mean, a, axis=axis, keepdims=keepdims)


def reshape(a, shape) -> Var:
    return apply(_reshape, a, shape=tuple(shape))


def transpose(a, axes=None) -> Var:
    return apply(_transpose, a, axes=axes)


def getitem(a, idx) -> Var:
    return apply(_getitem, a, idx=idx)


def concat(xs, axis: int = 0) -> Var:
    return apply(_concat, *xs, axis=axis)


def pad(a, widths) -> Var:
    return apply(_pad, a, widths=tuple(tuple(w) for w in widths))


def max_reduce(a, axis: int) -> Var:
    return apply(_max_reduce, a, axis=axis)


# ---------------------------------------------------------------- linear algebra

def _matmul(a, b):
    def vjp(g):
        ga = g @ np.swapaxes(b, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b)
        gb = np.swapaxes(a, -1, -2) @ g if a.ndim > 1 else np.multiply.outer(a, g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return a @ b, vjp


def _einsum(a, b, spec):
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    for s, other in ((sa, sb), (sb, sa)):
        if len(set(s)) != len(s) or not set(s) <= set(other) | set(out):
            raise ValueError(f"unsupported einsum pattern {spec!r}")

    def vjp(g):
        ga = np.einsum(f"{out},{sb}->{sa}", g, b, optimize=True)
        gb = np.einsum(f"{sa},{out}->{sb}", a, g, optimize=True)
        return ga, gb

    return np.einsum(spec, a, b, optimize=True), vjp


def matmul(a, b) -> Var:
    return apply(_matmul, a, b)


def einsum(spec: str, a, b) -> Var:
    return apply(_einsum, a, b, spec=spec)


# ---------------------------------------------------------------- image patches

def _unfold(x, kernel, stride):
    """(B, C, H, W) -> (B, C*kh*kw, Ho*Wo); patch rows in (channel, row, col) order."""
    B, C, H, W = x.shape
    kh, kw = kernel
    sh, sw = stride
    if kh > H or kw > W:
        raise ValueError(f"kernel {kernel} does not fit input of spatial size {(H, W)}")
    Ho, Wo = (H - kh) // sh + 1, (W - kw) // sw + 1
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3)).reshape(B, C * kh * kw, Ho * Wo)

    def vjp(g):
        g6 = g.reshape(B, C, kh, kw, Ho, Wo)
        gx = np.zeros_like(x)
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i:i + sh * (Ho - 1) + 1:sh, j:j + sw * (Wo - 1) + 1:sw] += g6[:, :, i, j]
        return (gx,)

    return out, vjp


def unfold(x, kernel, stride) -> Var:
    return apply(_unfold, x, kernel=tuple(kernel), stride=tuple(stride))


# ---------------------------------------------------------------- softmax / loss

def _softmax(a, axis=-1):
    z = a - a.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return out, vjp


def _cross_entropy(logits, labels):
    labels = labels.astype(np.int64)
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    n = logits.shape[0]
    loss = np.mean(lse - z[np.arange(n), labels])

    def vjp(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(n), labels] -= 1.0
        return g * p / n, None

    return np.asarray(loss), vjp


def softmax(a, axis: int = -1) -> Var:
    return apply(_softmax, a, axis=axis)


def softmax_cross_entropy(logits, labels) -> Var:
    """Mean cross-entropy of integer ``labels`` under softmax(logits)."""
    return apply(_cross_entropy, logits, Var(np.asarray(labels)))


# ---------------------------------------------------------------- wFM phase recursion

def _wfm_phase(theta, weights):
    """Incremental weighted Frechet mean of phases.

    theta: (B, K, N) principal phases, the K points of each window in
    traversal order; weights: (O, K) nonnegative. Returns (B, O, N).
    Step k moves the running mean a fraction w_k / sum_{i<=k} w_i along the
    shortest arc towards point k.
    """
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    S = np.cumsum(weights, axis=1)
    if np.any(S[:, -1] <= 0):
        raise ValueError("degenerate weight vector")
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_s = np.where(S > 0, 1.0 / S, 0.0)
    t = np.ascontiguousarray(weights * inv_s)
    phi = _kernels.phase_forward(theta, t)
    record_branch(lambda: _kernels.phase_signature(theta, t))

    def vjp(g):
        gtheta, gt = _kernels.phase_backward(theta, t, np.ascontiguousarray(g, dtype=np.float64))
        # t_k = w_k / S_k and S_k sums w_0..w_k
        tail = np.cumsum((gt * weights * inv_s * inv_s)[:, ::-1], axis=1)[:, ::-1]
        return gtheta, gt * inv_s - tail

    return phi, vjp


def wfm_phase(theta, weights) -> Var:
    return apply(_wfm_phase, theta, weights)

