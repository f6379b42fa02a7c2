"""Hot numeric kernels with two interchangeable backends.

The inner loops that dominate runtime (2d convolution forward/backward and the
line-splat rasterizer) exist twice: a numba ``@njit`` version and a vectorized
pure-numpy version. The numba path is used when numba imports successfully and
the environment variable ``CONTRAPOSE_NO_NUMBA`` is unset/0; otherwise the
numpy path is dispatched. Both paths implement identical math (floating-point
summation order may differ), and ``benchmarks/bench_kernels.py`` compares them.

Convolution kernels operate on pre-padded inputs; padding and output-size
checks live in the calling op.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("CONTRAPOSE_NO_NUMBA", "0").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via CONTRAPOSE_NO_NUMBA
    HAS_NUMBA = False

USING_NUMBA = HAS_NUMBA and not NUMBA_DISABLED


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _patches(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Strided view [N,C,Ho,Wo,kh,kw] of all receptive fields of a padded map."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward_numpy(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    pat = _patches(xp, w.shape[2], w.shape[3], stride)
    out = np.tensordot(pat, w, axes=([1, 4, 5], [1, 2, 3]))  # [N,Ho,Wo,F]
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward_w_numpy(xp, dout, kh: int, kw: int, stride: int) -> np.ndarray:
    pat = _patches(xp, kh, kw, stride)
    return np.tensordot(dout, pat, axes=([0, 2, 3], [0, 2, 3]))  # [F,C,kh,kw]


def conv2d_backward_x_numpy(dout, w, hp: int, wp: int, stride: int) -> np.ndarray:
    n, f, ho, wo = dout.shape
    _, c, kh, kw = w.shape
    dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
    for i in range(kh):
        for j in range(kw):
            contrib = np.einsum("nfhw,fc->nchw", dout, w[:, :, i, j])
            dxp[:, :, i : i + ho * stride : stride, j : j + wo * stride : stride] += contrib
    return dxp


def splat_segments_numpy(h: int, w: int, segs: np.ndarray, colors: np.ndarray,
                         sigma: float):
    """Gaussian-falloff line splats; returns (rgb [3,h,w], alpha [h,w]) float32."""
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    rgb = np.zeros((3, h, w), dtype=np.float64)
    alpha = np.zeros((h, w), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma * sigma)
    for s in range(segs.shape[0]):
        ax, ay, bx, by = segs[s]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        px, py = xs - ax, ys - ay
        if seg2 > 0.0:
            t = np.clip((px * dx + py * dy) / seg2, 0.0, 1.0)
        else:
            t = 0.0
        rx, ry = px - t * dx, py - t * dy
        a = np.exp(-(rx * rx + ry * ry) * inv)
        alpha += a
        rgb += a[None] * colors[s].reshape(3, 1, 1)
    return rgb.astype(np.float32), alpha.astype(np.float32)


# ---------------------------------------------------------------------------
# numba backend (same math, explicit loops)
# ---------------------------------------------------------------------------

def _conv2d_forward_loops(xp, w, stride):
    n, c, hp, wp = xp.shape
    f, _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.zeros((n, f, ho, wo), dtype=xp.dtype)
    for nn in range(n):
        for ff in range(f):
            for cc in range(c):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[ff, cc, i, j]
                        for y in range(ho):
                            hi = y * stride + i
                            for x in range(wo):
                                out[nn, ff, y, x] += wv * xp[nn, cc, hi, x * stride + j]
    return out


def _conv2d_backward_w_loops(xp, dout, kh, kw, stride):
    n, c, hp, wp = xp.shape
    f = dout.shape[1]
    ho, wo = dout.shape[2], dout.shape[3]
    dw = np.zeros((f, c, kh, kw), dtype=xp.dtype)
    for ff in range(f):
        for cc in range(c):
            for i in range(kh):
                for j in range(kw):
                    acc = 0.0
                    for nn in range(n):
                        for y in range(ho):
                            hi = y * stride + i
                            for x in range(wo):
                                acc += dout[nn, ff, y, x] * xp[nn, cc, hi, x * stride + j]
                    dw[ff, cc, i, j] = acc
    return dw


def _conv2d_backward_x_loops(dout, w, hp, wp, stride):
    n, f, ho, wo = dout.shape
    c, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
    for nn in range(n):
        for ff in range(f):
            for cc in range(c):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[ff, cc, i, j]
                        for y in range(ho):
                            hi = y * stride + i
                            for x in range(wo):
                                dxp[nn, cc, hi, x * stride + j] += wv * dout[nn, ff, y, x]
    return dxp


def _splat_segments_loops(h, w, segs, colors, sigma):
    rgb = np.zeros((3, h, w), dtype=np.float32)
    alpha = np.zeros((h, w), dtype=np.float32)
    inv = 1.0 / (2.0 * sigma * sigma)
    reach = 6.0 * sigma  # exp(-18) tail ~1.5e-8, below float32 noise
    for s in range(segs.shape[0]):
        ax, ay, bx, by = segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        y0 = max(0, int(math.floor(min(ay, by) - reach)))
        y1 = min(h, int(math.ceil(max(ay, by) + reach)) + 1)
        x0 = max(0, int(math.floor(min(ax, bx) - reach)))
        x1 = min(w, int(math.ceil(max(ax, bx) + reach)) + 1)
        for i in range(y0, y1):
            py = i - ay
            for j in range(x0, x1):
                px = j - ax
                if seg2 > 0.0:
                    t = (px * dx + py * dy) / seg2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                else:
                    t = 0.0
                rx = px - t * dx
                ry = py - t * dy
                a = math.exp(-(rx * rx + ry * ry) * inv)
                alpha[i, j] += a
                rgb[0, i, j] += a * colors[s, 0]
                rgb[1, i, j] += a * colors[s, 1]
                rgb[2, i, j] += a * colors[s, 2]
    return rgb, alpha


def _splat_segments_numba_entry(h, w, segs, colors, sigma):
    return _splat_impl(int(h), int(w), segs.astype(np.float64),
                       colors.astype(np.float64), float(sigma))


if HAS_NUMBA:
    _jit = njit(cache=True, fastmath=True)
    conv2d_forward_numba = _jit(_conv2d_forward_loops)
    conv2d_backward_w_numba = _jit(_conv2d_backward_w_loops)
    conv2d_backward_x_numba = _jit(_conv2d_backward_x_loops)
    _splat_impl = _jit(_splat_segments_loops)
    splat_segments_numba = _splat_segments_numba_entry

if USING_NUMBA:
    conv2d_forward = conv2d_forward_numba
    conv2d_backward_w = conv2d_backward_w_numba
    conv2d_backward_x = conv2d_backward_x_numba
    splat_segments = splat_segments_numba
else:
    conv2d_forward = conv2d_forward_numpy
    conv2d_backward_w = conv2d_backward_w_numpy
    conv2d_backward_x = conv2d_backward_x_numpy
    splat_segments = splat_segments_numpy
