"""Deterministic stick-figure hand renderer and procedural backgrounds.

Bones (wrist->base, base->joint1->joint2->tip per finger) are drawn as
gaussian-falloff line splats in pixel space, each finger with a fixed hue whose
brightness is modulated by the style seed. The foreground mask is the set of
pixels whose accumulated splat alpha exceeds a threshold; compositing is hard
cut-and-paste on that mask, so identical foregrounds over different backgrounds
agree exactly on mask==1 pixels.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .camera import Camera, project_points
from .rng import SeededRng

SPLAT_SIGMA = 0.8
MASK_THRESHOLD = 0.05

# wrist->base plus the three phalanx segments, per finger
_BONE_PAIRS = [(0, 1 + 4 * f) for f in range(5)]
for _f in range(5):
    _BONE_PAIRS += [(1 + 4 * _f + k, 2 + 4 * _f + k) for k in range(3)]

# five clearly separated hues (RGB), one per finger
_FINGER_COLORS = np.array([
    [0.95, 0.25, 0.20],
    [0.95, 0.80, 0.15],
    [0.25, 0.90, 0.30],
    [0.20, 0.55, 0.95],
    [0.80, 0.30, 0.90],
])


def composite(foreground: np.ndarray, mask: np.ndarray,
              background: np.ndarray) -> np.ndarray:
    """Cut-and-paste: foreground where mask==1, background elsewhere."""
    return np.where(mask[None] > 0.5, foreground, background).astype(np.float32)


def render_frame(cam: Camera, keypoints: np.ndarray, background: np.ndarray,
                 style_seed: int = 0):
    """Render [21,3] world keypoints over a [3,H,W] background.

    Returns (image [3,H,W] float32 in [0,1], mask [H,W] float32 in {0,1}).
    Identical inputs produce bit-identical outputs.
    """
    uv = project_points(cam, keypoints)
    h, w = cam.height, cam.width

    style = SeededRng(style_seed).derive("style")
    brightness = style.uniform(0.75, 1.0, size=5)
    colors = np.empty((len(_BONE_PAIRS), 3))
    segs = np.empty((len(_BONE_PAIRS), 4))
    for i, (a, b) in enumerate(_BONE_PAIRS):
        finger = 0 if i < 5 and False else ((a - 1) // 4 if a > 0 else (b - 1) // 4)
        colors[i] = _FINGER_COLORS[finger] * brightness[finger]
        segs[i] = (uv[a, 0], uv[a, 1], uv[b, 0], uv[b, 1])

    rgb, alpha = kernels.splat_segments(h, w, segs, colors, SPLAT_SIGMA)
    mask = (alpha > MASK_THRESHOLD).astype(np.float32)
    fg = np.clip(rgb, 0.0, 1.0)
    img = composite(fg, mask, np.asarray(background, dtype=np.float32))
    return img, mask


def value_noise_background(rng: SeededRng, size: int) -> np.ndarray:
    """Smooth multi-octave value-noise texture, [3,size,size] float32 in [0,1]."""
    img = np.zeros((3, size, size), dtype=np.float64)
    for grid, weight in ((4, 0.65), (8, 0.35)):
        lattice = rng.uniform(0.0, 1.0, size=(3, grid + 1, grid + 1))
        coords = np.arange(size) * (grid / size)
        i0 = coords.astype(np.int64)
        frac = coords - i0
        i1 = np.minimum(i0 + 1, grid)
        row = lattice[:, i0][:, :, i0] * ((1 - frac)[:, None] * (1 - frac)[None])
        row += lattice[:, i0][:, :, i1] * ((1 - frac)[:, None] * frac[None])
        row += lattice[:, i1][:, :, i0] * (frac[:, None] * (1 - frac)[None])
        row += lattice[:, i1][:, :, i1] * (frac[:, None] * frac[None])
        img += weight * row
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def write_ppm(path, img: np.ndarray):
    """8-bit PPM export of a [3,H,W] image in [0,1], for eyeballing frames."""
    arr = (np.clip(np.asarray(img), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(arr.transpose(1, 2, 0).tobytes())
