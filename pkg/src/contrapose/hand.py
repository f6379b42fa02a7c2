"""Differentiable articulated hand: 16 pose parameters -> 21 world keypoints.

Pose layout: root translation (3, meters), global rotation (3, axis-angle),
then per finger f=0..4 two flexion angles (phi1, phi2). Keypoint order: wrist,
then per finger base, joint1, joint2, tip. The chain is built from tape ops so
keypoints stay differentiable w.r.t. every pose entry, including through the
axis-angle rotation (series-expanded near zero angle, so the map is smooth on
all of pose space).
"""

from __future__ import annotations

import numpy as np

from .tensor import (Tensor, _accumulate, _record, concat, cos, mul, narrow,
                     sin, tensor_sum)

POSE_DIM = 16
NUM_KEYPOINTS = 21

FINGER_BASE_X = 0.08
FINGER_BASE_SPACING = 0.025
SEGMENT_LENGTHS = (0.035, 0.025, 0.020)
DISTAL_COUPLING = 2.0 / 3.0
ANGLE_MIN, ANGLE_MAX = 0.0, np.pi / 2


def _rotation_coeff_a(s: Tensor) -> Tensor:
    """sin(sqrt(s))/sqrt(s) as a smooth function of s = |w|^2."""
    sd = s.data
    small = sd < 1e-6
    r = np.sqrt(np.where(small, 1.0, sd))
    exact = np.sin(r) / r
    series = 1.0 - sd / 6.0 + sd * sd / 120.0
    out = Tensor(np.where(small, series, exact))
    dexact = (r * np.cos(r) - np.sin(r)) / (2.0 * r ** 3)
    dseries = -1.0 / 6.0 + sd / 60.0
    deriv = np.where(small, dseries, dexact)

    def bwd(g):
        _accumulate(s, g * deriv)

    _record(out, (s,), bwd)
    return out


def _rotation_coeff_b(s: Tensor) -> Tensor:
    """(1 - cos(sqrt(s)))/s as a smooth function of s = |w|^2."""
    sd = s.data
    small = sd < 1e-6
    r = np.sqrt(np.where(small, 1.0, sd))
    exact = (1.0 - np.cos(r)) / np.where(small, 1.0, sd)
    series = 0.5 - sd / 24.0 + sd * sd / 720.0
    out = Tensor(np.where(small, series, exact))
    dexact = (r * np.sin(r) - 2.0 * (1.0 - np.cos(r))) / (2.0 * r ** 4)
    dseries = -1.0 / 24.0 + sd / 360.0
    deriv = np.where(small, dseries, dexact)

    def bwd(g):
        _accumulate(s, g * deriv)

    _record(out, (s,), bwd)
    return out


def _cross(a_x, a_y, a_z, b_x, b_y, b_z):
    return (a_y * b_z - a_z * b_y,
            a_z * b_x - a_x * b_z,
            a_x * b_y - a_y * b_x)


def rotate_points(points: Tensor, omega: Tensor) -> Tensor:
    """Rodrigues rotation of [B,K,3] points by per-batch axis-angle [B,3]."""
    b = points.shape[0]
    w = omega.reshape((b, 1, 3))
    wx, wy, wz = (narrow(w, 2, i, 1) for i in range(3))
    px, py, pz = (narrow(points, 2, i, 1) for i in range(3))

    s = tensor_sum(mul(omega, omega), axis=1, keepdims=True).reshape((b, 1, 1))
    ca = _rotation_coeff_a(s)
    cb = _rotation_coeff_b(s)

    c1x, c1y, c1z = _cross(wx, wy, wz, px, py, pz)
    c2x, c2y, c2z = _cross(wx, wy, wz, c1x, c1y, c1z)
    out_x = px + ca * c1x + cb * c2x
    out_y = py + ca * c1y + cb * c2y
    out_z = pz + ca * c1z + cb * c2z
    return concat([out_x, out_y, out_z], axis=2)


def forward_kinematics(pose) -> Tensor:
    """Map pose [B,16] (or [16]) to world keypoints [B,21,3]."""
    if not isinstance(pose, Tensor):
        pose = Tensor(np.asarray(pose))
    squeeze = pose.data.ndim == 1
    if squeeze:
        pose = pose.reshape((1, POSE_DIM))
    if pose.shape[1] != POSE_DIM:
        raise ValueError(f"pose must have {POSE_DIM} entries, got {pose.shape}")
    b = pose.shape[0]
    dtype = pose.dtype

    trans = narrow(pose, 1, 0, 3)
    omega = narrow(pose, 1, 3, 3)

    zeros_col = Tensor(np.zeros((b, 1), dtype=dtype))
    palm_points = [Tensor(np.zeros((b, 3), dtype=dtype))]  # wrist at palm origin
    for f in range(5):
        base = np.array([FINGER_BASE_X, FINGER_BASE_SPACING * (f - 2), 0.0], dtype=dtype)
        base_t = Tensor(np.broadcast_to(base, (b, 3)).copy())
        phi1 = narrow(pose, 1, 6 + 2 * f, 1)
        phi2 = narrow(pose, 1, 7 + 2 * f, 1)
        angles = (phi1, phi1 + phi2, phi1 + phi2 + DISTAL_COUPLING * phi2)
        palm_points.append(base_t)
        point = base_t
        for length, theta in zip(SEGMENT_LENGTHS, angles):
            # Rot_y(theta) applied to +x: (cos, 0, -sin); flexion bends toward -z
            direction = concat([cos(theta), zeros_col, -sin(theta)], axis=1)
            point = point + length * direction
            palm_points.append(point)

    stacked = concat([p.reshape((b, 1, 3)) for p in palm_points], axis=1)
    world = rotate_points(stacked, omega) + trans.reshape((b, 1, 3))
    return world.reshape((NUM_KEYPOINTS, 3)) if squeeze else world


def fk_numpy(pose: np.ndarray) -> np.ndarray:
    """Plain-array forward kinematics (same math, no gradient recording)."""
    return forward_kinematics(np.asarray(pose)).data


def clamp_pose(pose: np.ndarray) -> np.ndarray:
    """Clamp the 10 finger angles into their mechanical range."""
    out = np.array(pose, copy=True)
    out[..., 6:] = np.clip(out[..., 6:], ANGLE_MIN, ANGLE_MAX)
    return out
