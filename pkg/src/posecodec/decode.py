"""Inference from predicted maps back to a 3D pose.

The pipeline is: heatmap argmax per joint, crop each limb's capsule on its
orientation map using the detected endpoints, average and renormalise the
cropped vectors, then place joints along the tree from the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camgeom import Keypoints2D, rasterize_capsule
from .encode import HeatmapStack, OrientationMapStack
from .errors import DegenerateOrientation, ShapeMismatch
from .skeleton import Pose3D, SkeletonSpec, reconstruct_pose

MIN_MEAN_NORM = 1e-6

FLAT_HEATMAP = "flat_heatmap"
UNDETECTED_ENDPOINT = "undetected_endpoint"


@dataclass(frozen=True)
class DecodeResult:
    keypoints: Keypoints2D
    orientations: np.ndarray  # (K, 3)
    per_limb_support: np.ndarray  # (K,) int
    pose: Pose3D
    warnings: tuple[tuple[str, int, str], ...]  # ("joint" | "limb", index, flag)


def argmax_keypoints(h: HeatmapStack, *, pixel_centers: bool = False) -> Keypoints2D:
    """Location of each map's maximum as (x, y) = (column, row).

    Ties go to the first occurrence in row-major order. Constant maps carry
    no detection and come back with ``visibility`` False. With
    ``pixel_centers`` the coordinates are shifted by +0.5 into the continuous
    map frame used for rendering and cropping.
    """
    data = h.data
    n, _, w = data.shape
    flat = data.reshape(n, -1)
    idx = np.argmax(flat, axis=1)  # numpy returns the first maximal index
    rows, cols = np.divmod(idx, w)
    pts = np.stack([cols, rows], axis=1).astype(np.float64)
    if pixel_centers:
        pts += 0.5
    detected = flat.max(axis=1) > flat.min(axis=1)
    return Keypoints2D(pts, detected)


def read_limb_orientation(o: OrientationMapStack, kp: Keypoints2D, spec: SkeletonSpec,
                          limb: int) -> tuple[np.ndarray, int]:
    """Mean vector over the limb's capsule crop, renormalised to unit length.

    ``kp`` must be in continuous map coordinates (pixel centers at +0.5).

    Raises:
        DegenerateOrientation: if the mean vector's norm is below 1e-6.
    """
    a, b = spec.limbs[limb]
    mask = rasterize_capsule(kp.points_px[a], kp.points_px[b], spec.limb_width_px[limb],
                             o.resolution)
    support = int(np.count_nonzero(mask))
    if support == 0:
        raise DegenerateOrientation(limb, f"limb {limb}: empty crop region")
    mean = o.data[limb][mask].mean(axis=0)
    norm = float(np.sqrt(mean @ mean))
    if norm < MIN_MEAN_NORM:
        raise DegenerateOrientation(limb)
    return mean / norm, support


def decode_pose(h: HeatmapStack, o: OrientationMapStack, spec: SkeletonSpec,
                lengths_mm=None, root_mm=(0.0, 0.0, 0.0)) -> DecodeResult:
    """Full decode. ``lengths_mm`` defaults to the skeleton's reference lengths.

    Maps in ``limb_vector`` mode decode the same way: the mean vector's
    direction is kept and rescaled to the supplied length.
    """
    if h.resolution != o.resolution:
        raise ShapeMismatch(f"heatmaps {h.resolution} vs orientation maps {o.resolution}")
    if h.data.shape[0] != spec.n_joints or o.data.shape[0] != spec.n_limbs:
        raise ShapeMismatch(
            f"stacks ({h.data.shape[0]} heatmaps, {o.data.shape[0]} limb maps) "
            f"do not match skeleton ({spec.n_joints} joints, {spec.n_limbs} limbs)")
    lengths = spec.ref_lengths if lengths_mm is None else np.asarray(lengths_mm, dtype=np.float64)

    kp = argmax_keypoints(h, pixel_centers=True)
    warnings = [("joint", int(n), FLAT_HEATMAP) for n in np.flatnonzero(~kp.visibility)]
    orient = np.zeros((spec.n_limbs, 3))
    support = np.zeros(spec.n_limbs, dtype=np.intp)
    for k, (a, b) in enumerate(spec.limbs):
        if not (kp.visibility[a] and kp.visibility[b]):
            warnings.append(("limb", k, UNDETECTED_ENDPOINT))
        orient[k], support[k] = read_limb_orientation(o, kp, spec, k)
    pose = reconstruct_pose(orient, lengths, root_mm, spec)
    return DecodeResult(kp, orient, support, pose, tuple(warnings))


def angular_error_deg(u, v) -> np.ndarray:
    """Angle between matching rows of two unit-vector arrays, in degrees."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    sin = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.degrees(np.arctan2(sin, np.sum(u * v, axis=-1)))
