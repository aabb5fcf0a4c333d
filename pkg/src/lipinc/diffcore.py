"""Minimal reverse-mode autodiff over numpy arrays.

The operator set is closed: exactly what the inconsistency network and its
losses need (3-D convolution, affine maps, relu, softmax, temporal pooling,
elementwise arithmetic, matmul, reductions, a global-statistics SSIM, log,
clip, and a few structural ops). Every operator records a vjp closure; a
reverse topological sweep accumulates gradients into the leaves.

Arrays keep whatever dtype they are given; training runs float32, gradient
checks run float64.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NotScalarError, ShapeError


class DiffArray:
    """An n-d array participating in a recorded computation graph.

    ``grad`` is populated (for nodes with ``requires_grad``) after calling
    ``backward`` on a scalar result.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"DiffArray(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __float__(self):
        return float(self.data)

    def item(self):
        return float(self.data)

    # arithmetic sugar; constants are wrapped on the fly
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

    def backward(self):
        backward(self)


def constant(value, dtype=None):
    """Wrap a value as a graph leaf that does not require gradients."""
    return DiffArray(np.asarray(value, dtype=dtype))


def leaf(value):
    """Wrap a value as a trainable leaf (gradients accumulate here)."""
    return DiffArray(np.asarray(value), requires_grad=True)


def _as_diff(x):
    return x if isinstance(x, DiffArray) else constant(x)


def backward(loss: DiffArray):
    """Reverse-mode sweep from a scalar ``loss`` to every reachable leaf."""
    if loss.data.ndim != 0:
        raise NotScalarError(f"backward needs a scalar, got shape {loss.data.shape}")

    # iterative topological order over the requires_grad subgraph
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones((), dtype=loss.data.dtype)
    for node in reversed(order):
        if node._vjp is None:
            continue
        grads = node._vjp(node.grad)
        for parent, g in zip(node._parents, grads):
            if not parent.requires_grad or g is None:
                continue
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    a, b = _as_diff(a), _as_diff(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return DiffArray(out, _parents=(a, b), _vjp=vjp)


def sub(a, b):
    a, b = _as_diff(a), _as_diff(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return DiffArray(out, _parents=(a, b), _vjp=vjp)


def mul(a, b):
    a, b = _as_diff(a), _as_diff(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return DiffArray(out, _parents=(a, b), _vjp=vjp)


def matmul(a, b):
    a, b = _as_diff(a), _as_diff(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul wants 2-d operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return DiffArray(out, _parents=(a, b), _vjp=vjp)


def relu(x):
    x = _as_diff(x)
    mask = x.data > 0
    out = np.where(mask, x.data, x.data.dtype.type(0))

    def vjp(g):
        return (g * mask,)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def log(x):
    x = _as_diff(x)
    out = np.log(x.data)

    def vjp(g):
        return (g / x.data,)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def clip(x, lo, hi):
    """Clamp to [lo, hi]; gradient passes only strictly inside the interval."""
    x = _as_diff(x)
    out = np.clip(x.data, lo, hi)
    interior = (x.data > lo) & (x.data < hi)

    def vjp(g):
        return (g * interior,)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


# ---------------------------------------------------------------------------
# reductions and structure


def sum_(x, axis=None):
    x = _as_diff(x)
    out = x.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).copy(),)
        gx = np.expand_dims(g, axis)
        return (np.broadcast_to(gx, x.data.shape).copy(),)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def mean(x, axis=None):
    x = _as_diff(x)
    out = x.data.mean(axis=axis)
    if axis is None:
        count = x.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= x.data.shape[ax]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, x.data.shape).copy(),)
        gx = np.expand_dims(g / count, axis)
        return (np.broadcast_to(gx, x.data.shape).copy(),)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def reshape(x, shape):
    x = _as_diff(x)
    out = x.data.reshape(shape)

    def vjp(g):
        return (g.reshape(x.data.shape),)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def concat(parts, axis=0):
    parts = [_as_diff(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def vjp(g):
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(g, splits, axis=axis))

    return DiffArray(out, _parents=tuple(parts), _vjp=vjp)


def take(x, index):
    """Select ``x[index]`` along the first axis (integer index)."""
    x = _as_diff(x)
    out = x.data[index]

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[index] = g
        return (gx,)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def softmax(x):
    """Softmax over the last axis, computed with max subtraction."""
    x = _as_diff(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


def temporal_adaptive_pool(x, t_out):
    """Average rows of a (T, D) array into ``t_out`` contiguous bins.

    Bin i covers rows [floor(i*T/t_out), floor((i+1)*T/t_out)).
    """
    x = _as_diff(x)
    if x.data.ndim != 2:
        raise ShapeError(f"temporal pool wants (T, D), got {x.data.shape}")
    t_in = x.data.shape[0]
    if t_in < 1 or t_out < 1:
        raise ShapeError(f"temporal pool needs T >= 1 and T_out >= 1, got {t_in}, {t_out}")
    bounds = [(i * t_in) // t_out for i in range(t_out + 1)]
    if any(bounds[i] == bounds[i + 1] for i in range(t_out)):
        raise ShapeError(f"temporal pool cannot expand {t_in} rows to {t_out} bins")
    out = np.stack([x.data[bounds[i]:bounds[i + 1]].mean(axis=0) for i in range(t_out)])

    def vjp(g):
        gx = np.zeros_like(x.data)
        for i in range(t_out):
            lo, hi = bounds[i], bounds[i + 1]
            gx[lo:hi] = g[i] / (hi - lo)
        return (gx,)

    return DiffArray(out, _parents=(x,), _vjp=vjp)


# ---------------------------------------------------------------------------
# 3-D convolution


def _same_pad(n, k, s):
    total = max((math.ceil(n / s) - 1) * s + k - n, 0)
    return total // 2, total - total // 2


def conv3d(x, kernel, stride=(1, 1, 1), temporal_pad="same", spatial_pad="valid"):
    """Cross-correlate a (T, H, W, Cin) input with a (kt, kh, kw, Cin, Cout) kernel.

    Temporal padding defaults to "same", spatial to "valid"; stride applies
    per axis as (st, sh, sw).
    """
    x, kernel = _as_diff(x), _as_diff(kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 5:
        raise ShapeError(
            f"conv3d wants (T,H,W,Cin) and (kt,kh,kw,Cin,Cout), got {x.data.shape}, {kernel.data.shape}"
        )
    if x.data.shape[3] != kernel.data.shape[3]:
        raise ShapeError(
            f"conv3d channel mismatch: input has {x.data.shape[3]}, kernel expects {kernel.data.shape[3]}"
        )
    kt, kh, kw = kernel.data.shape[:3]
    st, sh, sw = stride
    pads = []
    for n, k, s, mode in (
        (x.data.shape[0], kt, st, temporal_pad),
        (x.data.shape[1], kh, sh, spatial_pad),
        (x.data.shape[2], kw, sw, spatial_pad),
    ):
        pads.append(_same_pad(n, k, s) if mode == "same" else (0, 0))
    xp = np.pad(x.data, (*pads, (0, 0)))
    tp, hp, wp = xp.shape[:3]
    if tp < kt or hp < kh or wp < kw:
        raise ShapeError(f"kernel {kernel.data.shape[:3]} exceeds padded input {xp.shape[:3]}")
    t_out = (tp - kt) // st + 1
    h_out = (hp - kh) // sh + 1
    w_out = (wp - kw) // sw + 1

    win = np.lib.stride_tricks.sliding_window_view(xp, (kt, kh, kw), axis=(0, 1, 2))
    win = win[::st, ::sh, ::sw]  # (t_out, h_out, w_out, Cin, kt, kh, kw)
    out = np.tensordot(win, kernel.data, axes=([4, 5, 6, 3], [0, 1, 2, 3]))
    out = np.ascontiguousarray(out, dtype=x.data.dtype)

    def vjp(g):
        gk = np.zeros_like(kernel.data)
        gxp = np.zeros_like(xp)
        for dt in range(kt):
            ts = slice(dt, dt + (t_out - 1) * st + 1, st)
            for dh in range(kh):
                hs = slice(dh, dh + (h_out - 1) * sh + 1, sh)
                for dw in range(kw):
                    ws = slice(dw, dw + (w_out - 1) * sw + 1, sw)
                    patch = xp[ts, hs, ws]  # (t_out, h_out, w_out, Cin)
                    gk[dt, dh, dw] = np.tensordot(patch, g, axes=([0, 1, 2], [0, 1, 2]))
                    gxp[ts, hs, ws] += g @ kernel.data[dt, dh, dw].T
        (pt0, _), (ph0, _), (pw0, _) = pads
        gx = gxp[
            pt0:pt0 + x.data.shape[0],
            ph0:ph0 + x.data.shape[1],
            pw0:pw0 + x.data.shape[2],
        ]
        return gx, gk

    return DiffArray(out, _parents=(x, kernel), _vjp=vjp)


def dense(x, w, b):
    """Affine map ``x @ w + b`` (bias broadcasts over rows)."""
    return add(matmul(x, w), b)


# ---------------------------------------------------------------------------
# structural similarity with global statistics

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def global_ssim(x, y):
    """Single-window SSIM of two same-shape maps using global statistics.

    Uses C1=(0.01)^2, C2=(0.03)^2 for a dynamic range of 1 and clamps the
    result to [0, 1]; the gradient is zero at and beyond the clamp
    boundaries.
    """
    x, y = _as_diff(x), _as_diff(y)
    if x.data.shape != y.data.shape:
        raise ShapeError(f"ssim shape mismatch: {x.data.shape} vs {y.data.shape}")
    n = x.data.size
    mx = x.data.mean()
    my = y.data.mean()
    dx = x.data - mx
    dy = y.data - my
    vx = (dx * dx).mean()
    vy = (dy * dy).mean()
    cxy = (dx * dy).mean()
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * cxy + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = vx + vy + SSIM_C2
    raw = (a1 * a2) / (b1 * b2)
    out = np.clip(raw, 0.0, 1.0)
    inside = 0.0 < raw < 1.0

    def vjp(g):
        if not inside:
            return np.zeros_like(x.data), np.zeros_like(y.data)
        denom = b1 * b2
        # dS/dA1 etc. for S = A1*A2 / (B1*B2)
        s_a1 = a2 / denom
        s_a2 = a1 / denom
        s_b1 = -raw / b1
        s_b2 = -raw / b2
        gx = (s_a1 * (2.0 * my / n)
              + s_a2 * (2.0 * dy / n)
              + s_b1 * (2.0 * mx / n)
              + s_b2 * (2.0 * dx / n))
        gy = (s_a1 * (2.0 * mx / n)
              + s_a2 * (2.0 * dx / n)
              + s_b1 * (2.0 * my / n)
              + s_b2 * (2.0 * dy / n))
        return g * gx, g * gy

    return DiffArray(np.asarray(out, dtype=x.data.dtype), _parents=(x, y), _vjp=vjp)


# ---------------------------------------------------------------------------
# numerical checking helpers


def numeric_grad(fn, arrays, which, step=1e-5):
    """Central-difference gradient of ``fn(arrays)`` w.r.t. ``arrays[which]``.

    ``fn`` maps a list of numpy arrays to a float; the probe mutates a copy.
    """
    work = [np.array(a, dtype=np.float64) for a in arrays]
    target = work[which]
    grad = np.zeros_like(target)
    flat = target.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = fn(work)
        flat[i] = orig - step
        fm = fn(work)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def max_rel_err(a, b, floor=1e-6):
    """Max elementwise relative error with an absolute floor for tiny values."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0
