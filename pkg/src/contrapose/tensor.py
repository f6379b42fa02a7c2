"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a float32 numpy array (float64 for verification runs; the dtype
of the wrapped data decides). Differentiable ops record a backward closure on
the innermost active Tape; ``backward(tape, loss)`` replays the closures in
exact reverse execution order and accumulates gradients additively into
``Tensor.grad``. Without an active tape every op is a plain numpy computation.

Convolution dispatches to the kernels module (numba or numpy backend); all
other ops are vectorized numpy.
"""

from __future__ import annotations

import numpy as np

from . import kernels

_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of executed differentiable ops; one backward pass max."""

    def __init__(self):
        self._nodes = []  # (output Tensor, backward closure)
        self.consumed = False

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self._nodes)


def _active_tape():
    return _TAPES[-1] if _TAPES else None


class Tensor:
    """n-d float array, optionally participating in gradient recording."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)  # owned copy, never a view
    else:
        t.grad += g


def _record(out: Tensor, inputs, backward_fn):
    tape = _active_tape()
    if tape is not None and any(i.requires_grad for i in inputs):
        out.requires_grad = True
        tape._nodes.append((out, backward_fn))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "dtype", np.float32))
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data + b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    _record(out, (a, b), bwd)
    return out


def sub(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "dtype", np.float32))
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data - b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    _record(out, (a, b), bwd)
    return out


def mul(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "dtype", np.float32))
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * bd, a.shape))
        _accumulate(b, _unbroadcast(g * ad, b.shape))

    _record(out, (a, b), bwd)
    return out


def div(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "dtype", np.float32))
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data / b.data)
    ad, bd = a.data, b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g / bd, a.shape))
        _accumulate(b, _unbroadcast(-g * ad / (bd * bd), b.shape))

    _record(out, (a, b), bwd)
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    _record(out, (a,), lambda g: _accumulate(a, -g))
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0))
    pos = a.data > 0

    def bwd(g):
        _accumulate(a, g * pos)

    _record(out, (a,), bwd)
    return out


def sin(a: Tensor) -> Tensor:
    out = Tensor(np.sin(a.data))
    ad = a.data

    def bwd(g):
        _accumulate(a, g * np.cos(ad))

    _record(out, (a,), bwd)
    return out


def cos(a: Tensor) -> Tensor:
    out = Tensor(np.cos(a.data))
    ad = a.data

    def bwd(g):
        _accumulate(a, -g * np.sin(ad))

    _record(out, (a,), bwd)
    return out


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    orig = a.data.shape

    def bwd(g):
        _accumulate(a, g.reshape(orig))

    _record(out, (a,), bwd)
    return out


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = Tensor(a.data[idx].copy())

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accumulate(a, full)

    _record(out, (a,), bwd)
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(int(lo), int(hi))
            _accumulate(t, g[tuple(idx)])

    _record(out, tuple(tensors), bwd)
    return out


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    shape = a.data.shape

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _accumulate(a, np.broadcast_to(gg, shape).astype(a.data.dtype))

    _record(out, (a,), bwd)
    return out


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))
    shape = a.data.shape
    count = float(a.data.size if axis is None else np.prod(
        [shape[i] for i in (axis if isinstance(axis, tuple) else (axis,))]))

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _accumulate(a, (np.broadcast_to(gg, shape) / count).astype(a.data.dtype))

    _record(out, (a,), bwd)
    return out


# ---------------------------------------------------------------------------
# linear algebra / network layers
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a = _as_tensor(a, getattr(b, "dtype", np.float32))
    b = _as_tensor(b, a.dtype)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} x {b.data.shape}")
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data

    def bwd(g):
        _accumulate(a, g @ bd.T)
        _accumulate(b, ad.T @ g)

    _record(out, (a, b), bwd)
    return out


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of [N,C,H,W] with [F,C,kh,kw] filters."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-d input and weight, got {x.data.shape} and {w.data.shape}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"conv2d channel mismatch: input {x.data.shape} vs weight {w.data.shape}")
    if x.data.dtype != w.data.dtype:
        raise ValueError(f"conv2d dtype mismatch: {x.data.dtype} vs {w.data.dtype}")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d invalid stride={stride} padding={padding}")
    n, c, h, wid = x.data.shape
    f, _, kh, kw = w.data.shape
    hp, wp = h + 2 * padding, wid + 2 * padding
    if kh > hp or kw > wp:
        raise ValueError(f"conv2d kernel ({kh}x{kw}) exceeds padded input ({hp}x{wp})")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ValueError(f"conv2d non-positive output size {ho}x{wo}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) \
        if padding else np.ascontiguousarray(x.data)
    out = Tensor(kernels.conv2d_forward(xp, w.data, stride))
    wd = w.data

    def bwd(g):
        g = np.ascontiguousarray(g)
        if w.requires_grad:
            _accumulate(w, kernels.conv2d_backward_w(xp, g, kh, kw, stride))
        if x.requires_grad:
            dxp = kernels.conv2d_backward_x(g, wd, hp, wp, stride)
            if padding:
                dxp = dxp[:, :, padding:-padding, padding:-padding]
            _accumulate(x, dxp)

    _record(out, (x, w), bwd)
    return out


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                running_var: np.ndarray, train: bool, eps: float = 1e-5,
                momentum: float = 0.1, update_stats: bool = True) -> Tensor:
    """Per-channel batch normalization over [N,C,H,W].

    Train mode normalizes with batch statistics (biased variance) and, when
    ``update_stats``, folds them into the running buffers in place. Eval mode
    normalizes with the running buffers only.
    """
    n, c, h, w = x.data.shape
    m = n * h * w
    if train and m < 2:
        raise ValueError(f"batchnorm2d needs N*H*W >= 2 in train mode, got {m}")
    gd = gamma.data.reshape(1, c, 1, 1)

    if train:
        mu = x.data.mean(axis=(0, 2, 3), keepdims=True)
        var = x.data.var(axis=(0, 2, 3), keepdims=True)
        if update_stats:
            unbiased = var.reshape(c) * (m / (m - 1))
            running_mean[:] = (1.0 - momentum) * running_mean + momentum * mu.reshape(c)
            running_var[:] = (1.0 - momentum) * running_var + momentum * unbiased
    else:
        mu = running_mean.reshape(1, c, 1, 1).astype(x.data.dtype)
        var = running_var.reshape(1, c, 1, 1).astype(x.data.dtype)

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = Tensor(gd * xhat + beta.data.reshape(1, c, 1, 1))

    def bwd(g):
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dxhat = g * gd
            if train:
                s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
                s2 = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
                dx = inv_std / m * (m * dxhat - s1 - xhat * s2)
            else:
                dx = dxhat * inv_std
            _accumulate(x, dx.astype(x.data.dtype))

    _record(out, (x, gamma, beta), bwd)
    return out


def l2_normalize(v: Tensor) -> Tensor:
    """Scale each row of [N,D] to unit Euclidean norm."""
    if v.data.ndim != 2:
        raise ValueError(f"l2_normalize expects [N,D], got {v.data.shape}")
    norms = np.sqrt((v.data * v.data).sum(axis=1, keepdims=True))
    bad = np.nonzero(norms.reshape(-1) <= 1e-12)[0]
    if bad.size:
        raise ValueError(f"l2_normalize: near-zero row {int(bad[0])}")
    y = v.data / norms
    out = Tensor(y)

    def bwd(g):
        proj = (g * y).sum(axis=1, keepdims=True)
        _accumulate(v, (g - y * proj) / norms)

    _record(out, (v,), bwd)
    return out


def softmax_cross_entropy(logits: Tensor, target_index) -> Tensor:
    """Mean over rows of -log softmax(logits)[target]; max-shifted for stability."""
    t = np.asarray(target_index, dtype=np.int64).reshape(-1)
    n, c = logits.data.shape
    if t.shape[0] != n:
        raise ValueError(f"softmax_cross_entropy: {n} rows but {t.shape[0]} targets")
    if t.min() < 0 or t.max() >= c:
        raise ValueError(f"softmax_cross_entropy: target out of range [0,{c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    logp = z - np.log(denom)
    out = Tensor(np.asarray(-logp[np.arange(n), t].mean(), dtype=logits.data.dtype))
    softmax = ez / denom

    def bwd(g):
        d = softmax.copy()
        d[np.arange(n), t] -= 1.0
        _accumulate(logits, d * (g / n))

    _record(out, (logits,), bwd)
    return out


# ---------------------------------------------------------------------------
# backward driver
# ---------------------------------------------------------------------------

def backward(tape: Tape, loss: Tensor):
    """Replay the tape in reverse, seeding d(loss)/d(loss) = 1."""
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    if tape.consumed:
        raise RuntimeError("backward called twice on the same tape")
    tape.consumed = True
    loss.grad = np.ones_like(loss.data)
    for out, fn in reversed(tape._nodes):
        if out.grad is not None:
            fn(out.grad)
