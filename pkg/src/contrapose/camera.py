"""Pinhole cameras and the 8-camera cube rig.

World-to-camera: X_cam = R @ X_world + t, pixel u = fx*x/z + cx,
v = fy*y/z + cy. Rig cameras sit on the corners of a cube centered at the
origin, all looking at the center; two cameras are adjacent when their corner
indices differ in exactly one coordinate bit (12 undirected edges).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, concat, div, matmul, narrow


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    r: np.ndarray  # [3,3] world->camera rotation
    t: np.ndarray  # [3] world->camera translation
    width: int
    height: int

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not np.allclose(self.r.T @ self.r, np.eye(3), atol=1e-9):
            raise ValueError("camera rotation is not orthonormal")
        if np.linalg.det(self.r) < 0:
            raise ValueError("camera rotation has negative determinant")

    def camera_frame(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.r.T + self.t

    def position(self) -> np.ndarray:
        return -self.r.T @ self.t


def project_points(cam: Camera, points: np.ndarray) -> np.ndarray:
    """Project [K,3] world points to [K,2] pixels; rejects points behind the camera."""
    pc = cam.camera_frame(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    bad = np.nonzero(pc[:, 2] <= 1e-6)[0]
    if bad.size:
        raise ValueError(f"point {int(bad[0])} at or behind the camera plane (z={pc[bad[0], 2]:.3g})")
    uv = np.empty((pc.shape[0], 2))
    uv[:, 0] = cam.fx * pc[:, 0] / pc[:, 2] + cam.cx
    uv[:, 1] = cam.fy * pc[:, 1] / pc[:, 2] + cam.cy
    return uv


def project(cam: Camera, points: Tensor) -> Tensor:
    """Differentiable projection of [K,3] or [B,K,3] keypoints to pixels."""
    batched = points.data.ndim == 3
    shape = points.shape
    flat = points.reshape((-1, 3))
    dtype = flat.dtype
    rt = Tensor(cam.r.T.astype(dtype))
    tt = Tensor(cam.t.astype(dtype))
    pc = matmul(flat, rt) + tt
    z = narrow(pc, 1, 2, 1)
    bad = np.nonzero(z.data.reshape(-1) <= 1e-6)[0]
    if bad.size:
        raise ValueError(f"point {int(bad[0])} at or behind the camera plane")
    u = float(cam.fx) * div(narrow(pc, 1, 0, 1), z) + float(cam.cx)
    v = float(cam.fy) * div(narrow(pc, 1, 1, 1), z) + float(cam.cy)
    uv = concat([u, v], axis=1)
    return uv.reshape((shape[0], shape[1], 2)) if batched else uv


@dataclass
class CameraRig:
    cameras: list[Camera] = field(default_factory=list)

    def __len__(self):
        return len(self.cameras)

    def neighbors(self, index: int) -> list[int]:
        """Corner indices reachable along exactly one cube edge."""
        return sorted(index ^ (1 << bit) for bit in range(3))

    def edges(self) -> list[tuple[int, int]]:
        out = set()
        for i in range(len(self.cameras)):
            for j in self.neighbors(i):
                out.add((min(i, j), max(i, j)))
        return sorted(out)


def _look_at(position: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z_axis = -position / np.linalg.norm(position)
    up = np.array([0.0, 0.0, 1.0])
    if abs(abs(z_axis @ up) - 1.0) < 1e-6:
        up = np.array([1.0, 0.0, 0.0])
    x_axis = np.cross(up, z_axis)
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    r = np.stack([x_axis, y_axis, z_axis])
    return r, -r @ position


def build_cube_rig(side: float = 1.0, focal: float = 40.0,
                   image_size: int = 32) -> CameraRig:
    """Eight cameras on cube corners (side meters), all aimed at the origin."""
    if side <= 0:
        raise ValueError(f"cube side must be positive, got {side}")
    cams = []
    for idx in range(8):
        bits = np.array([(idx >> b) & 1 for b in range(3)], dtype=np.float64)
        pos = (bits - 0.5) * side
        r, t = _look_at(pos)
        c = image_size / 2.0
        cams.append(Camera(fx=focal, fy=focal, cx=c, cy=c, r=r, t=t,
                           width=image_size, height=image_size))
    return CameraRig(cams)
