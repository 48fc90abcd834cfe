"""Ground-truth target rendering: keypoint heatmaps and per-limb orientation maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camgeom import Keypoints2D, pixel_centers, rasterize_capsule
from .errors import JointCountMismatch
from .skeleton import Pose3D, SkeletonSpec, pose_to_limb_vectors

MODES = ("orientation", "limb_vector")

DEFAULT_SIGMA_PX = 2.0
DEFAULT_MAP_SIZE = (64, 64)

# per-limb warning flags
ZERO_LENGTH = "zero_length_limb"
INVISIBLE_ENDPOINT = "invisible_endpoint"


@dataclass(frozen=True)
class HeatmapStack:
    data: np.ndarray  # (N, H, W)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


@dataclass(frozen=True)
class OrientationMapStack:
    data: np.ndarray  # (K, H, W, 3)
    mode: str = "orientation"
    # (limb, flag) pairs for limbs rendered as background
    flags: tuple[tuple[int, str], ...] = field(default=())

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown map mode {self.mode!r}")
        if self.data.ndim != 4 or self.data.shape[-1] != 3:
            raise ValueError(f"expected (K, H, W, 3) maps, got {self.data.shape}")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


def render_heatmaps(kp: Keypoints2D, sigma_px: float = DEFAULT_SIGMA_PX,
                    grid: tuple[int, int] = DEFAULT_MAP_SIZE) -> HeatmapStack:
    """Unnormalised Gaussian per joint (peak 1 at the keypoint); invisible joints get zeros."""
    if not sigma_px > 0:
        raise ValueError("sigma must be positive")
    px, py = pixel_centers(grid)
    pts = kp.points_px
    out = np.zeros((kp.n_joints,) + tuple(grid))
    for n in np.flatnonzero(kp.visibility):
        d2 = (px - pts[n, 0]) ** 2 + (py - pts[n, 1]) ** 2
        out[n] = np.exp(-d2 / (2.0 * sigma_px * sigma_px))
    return HeatmapStack(out)


def render_orientation_maps(pose: Pose3D, kp: Keypoints2D, spec: SkeletonSpec,
                            grid: tuple[int, int] = DEFAULT_MAP_SIZE,
                            mode: str = "orientation") -> OrientationMapStack:
    """Fill each limb's capsule with its unit orientation (or torso-normalised limb vector).

    Pixels outside a limb's capsule are exactly zero. Limbs of zero length or
    with an invisible endpoint are left as background and reported in ``flags``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown map mode {mode!r}")
    if kp.n_joints != spec.n_joints:
        raise JointCountMismatch(f"{kp.n_joints} keypoints for {spec.n_joints} joints")
    limbs = pose_to_limb_vectors(pose, spec)
    if mode == "orientation":
        values = limbs.orientations
    else:
        values = limbs.vectors / spec.torso_length_mm
    out = np.zeros((spec.n_limbs,) + tuple(grid) + (3,))
    flags = []
    for k, (a, b) in enumerate(spec.limbs):
        if limbs.zero_length[k]:
            flags.append((k, ZERO_LENGTH))
            continue
        if not (kp.visibility[a] and kp.visibility[b]):
            flags.append((k, INVISIBLE_ENDPOINT))
            continue
        mask = rasterize_capsule(kp.points_px[a], kp.points_px[b], spec.limb_width_px[k], grid)
        out[k][mask] = values[k]
    return OrientationMapStack(out, mode, tuple(flags))
