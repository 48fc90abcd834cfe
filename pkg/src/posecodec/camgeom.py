"""Pinhole projection and capsule rasterization.

Pixel convention: pixel (i, j) (row i, column j) has its center at
continuous coordinate (x, y) = (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera
from .skeleton import Pose3D


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    image_w: int
    image_h: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.image_w and 0 <= self.cy < self.image_h):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_json(cls, d: dict) -> "CameraModel":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["image_w"]), int(d["image_h"]))

    def to_json(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "image_w": self.image_w, "image_h": self.image_h}


@dataclass(frozen=True)
class Keypoints2D:
    points_px: np.ndarray  # (N, 2) as (x, y)
    visibility: np.ndarray  # (N,) bool

    def __post_init__(self):
        pts = np.asarray(self.points_px, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected (N, 2) keypoints, got {pts.shape}")
        vis = (np.ones(len(pts), dtype=bool) if self.visibility is None
               else np.asarray(self.visibility, dtype=bool))
        if vis.shape != (len(pts),):
            raise ValueError("visibility must have one flag per keypoint")
        if not np.all(np.isfinite(pts[vis])):
            raise ValueError("visible keypoints must be finite")
        object.__setattr__(self, "points_px", pts)
        object.__setattr__(self, "visibility", vis)

    @classmethod
    def all_visible(cls, points) -> "Keypoints2D":
        pts = np.asarray(points, dtype=np.float64)
        return cls(pts, np.ones(len(pts), dtype=bool))

    @property
    def n_joints(self) -> int:
        return self.points_px.shape[0]


def project(pose: Pose3D, cam: CameraModel) -> Keypoints2D:
    """Project camera-frame joints to image pixels; out-of-image points are marked invisible."""
    j = pose.joints_mm
    z = j[:, 2]
    if np.any(z <= 0):
        raise BehindCamera(f"joint {int(np.flatnonzero(z <= 0)[0])} has z <= 0")
    x = cam.fx * j[:, 0] / z + cam.cx
    y = cam.fy * j[:, 1] / z + cam.cy
    vis = (x >= 0) & (x < cam.image_w) & (y >= 0) & (y < cam.image_h)
    return Keypoints2D(np.stack([x, y], axis=1), vis)


def to_map_coords(kp: Keypoints2D, cam: CameraModel, grid: tuple[int, int]) -> Keypoints2D:
    """Rescale image-pixel keypoints to output-map pixel units."""
    h, w = grid
    scale = np.array([w / cam.image_w, h / cam.image_h])
    return Keypoints2D(kp.points_px * scale, kp.visibility.copy())


def pixel_centers(grid: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    h, w = grid
    xs = np.arange(w, dtype=np.float64) + 0.5
    ys = np.arange(h, dtype=np.float64) + 0.5
    return np.meshgrid(xs, ys)  # each (H, W)


def segment_distance_sq(a, b, grid: tuple[int, int]) -> np.ndarray:
    """Squared distance from every pixel center to segment ab, shape (H, W)."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    if (bx, by) < (ax, ay):
        # canonical endpoint order keeps the mask bit-identical under a <-> b
        ax, ay, bx, by = bx, by, ax, ay
    px, py = pixel_centers(grid)
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    if den > 0:
        t = np.clip(((px - ax) * dx + (py - ay) * dy) / den, 0.0, 1.0)
    else:
        t = np.zeros_like(px)
    qx = px - (ax + t * dx)
    qy = py - (ay + t * dy)
    return qx * qx + qy * qy


def rasterize_capsule(a, b, width_px: float, grid: tuple[int, int]) -> np.ndarray:
    """Boolean (H, W) mask of pixels whose center lies within ``width_px`` of segment ab."""
    if not width_px > 0:
        raise ValueError("capsule width must be positive")
    return segment_distance_sq(a, b, grid) <= width_px * width_px
