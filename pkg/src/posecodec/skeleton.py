"""Skeleton topology and pose <-> limb-vector conversions.

Coordinates are millimetres in the camera frame (x right, y down, z forward).
A limb is a (parent_joint, child_joint) pair; every non-root joint is the
child of exactly one limb, so a skeleton with N joints has N - 1 limbs.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, JointCountMismatch, NonUnitOrientation, SkeletonError

ZERO_LENGTH_MM = 1e-9
UNIT_TOL = 1e-6


@dataclass(frozen=True)
class SkeletonSpec:
    joint_names: tuple[str, ...]
    parent: tuple[int, ...]
    limbs: tuple[tuple[int, int], ...]
    limb_width_px: tuple[float, ...]
    ref_limb_length_mm: tuple[float, ...]
    root_index: int = 0
    # Optional extras: rest-pose limb directions (for the synthetic sampler)
    # and the joint whose root path defines the torso length.
    rest_directions: tuple[tuple[float, float, float], ...] | None = None
    torso_joint: int | None = None

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.parent) != n:
            raise SkeletonError(f"{len(self.parent)} parents for {n} joints")
        if not 0 <= self.root_index < n:
            raise SkeletonError(f"root index {self.root_index} out of range")
        if self.parent[self.root_index] != self.root_index:
            raise SkeletonError("root must be its own parent")
        for j, p in enumerate(self.parent):
            if not 0 <= p < n:
                raise SkeletonError(f"joint {j} has parent {p} out of range")
            if j != self.root_index and p == j:
                raise SkeletonError(f"joint {j} is a second root")
        # every joint must reach the root without revisiting anything
        for j in range(n):
            seen = set()
            k = j
            while k != self.root_index:
                if k in seen:
                    raise SkeletonError(f"cycle through joint {k}")
                seen.add(k)
                k = self.parent[k]
        k_count = len(self.limbs)
        if k_count != n - 1:
            raise SkeletonError(f"expected {n - 1} limbs, got {k_count}")
        edges = {(self.parent[j], j) for j in range(n) if j != self.root_index}
        if set(map(tuple, self.limbs)) != edges or len(set(self.limbs)) != k_count:
            raise SkeletonError("limbs must list each (parent[j], j) edge exactly once")
        if len(self.limb_width_px) != k_count or len(self.ref_limb_length_mm) != k_count:
            raise SkeletonError("need one width and one reference length per limb")
        if min(self.limb_width_px) <= 0 or min(self.ref_limb_length_mm) <= 0:
            raise SkeletonError("limb widths and reference lengths must be positive")
        if self.rest_directions is not None and len(self.rest_directions) != k_count:
            raise SkeletonError("need one rest direction per limb")
        if self.torso_joint is not None and not 0 <= self.torso_joint < n:
            raise SkeletonError("torso joint out of range")

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def n_limbs(self) -> int:
        return len(self.limbs)

    @cached_property
    def limb_parent(self) -> np.ndarray:
        return np.array([a for a, _ in self.limbs], dtype=np.intp)

    @cached_property
    def limb_child(self) -> np.ndarray:
        return np.array([b for _, b in self.limbs], dtype=np.intp)

    @cached_property
    def limb_of_joint(self) -> dict[int, int]:
        """Map child joint -> index of the limb ending there."""
        return {b: k for k, (_, b) in enumerate(self.limbs)}

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_joints, dtype=np.intp)
        for j in range(self.n_joints):
            k = j
            while k != self.root_index:
                d[j] += 1
                k = self.parent[k]
        return d

    @cached_property
    def limb_order(self) -> tuple[int, ...]:
        """Limb indices in parent-before-child order, ties broken by joint index."""
        joints = sorted(
            (j for j in range(self.n_joints) if j != self.root_index),
            key=lambda j: (self.depth[j], j),
        )
        return tuple(self.limb_of_joint[j] for j in joints)

    def limb_path(self, joint: int) -> list[int]:
        """Limbs on the path from the root down to ``joint`` (root side first)."""
        path = []
        while joint != self.root_index:
            path.append(self.limb_of_joint[joint])
            joint = self.parent[joint]
        return path[::-1]

    def subtree(self, limb: int) -> list[int]:
        """Joints whose position depends on ``limb`` (its child and descendants)."""
        children: dict[int, list[int]] = {}
        for j, p in enumerate(self.parent):
            if j != self.root_index:
                children.setdefault(p, []).append(j)
        out, todo = [], deque([self.limbs[limb][1]])
        while todo:
            j = todo.popleft()
            out.append(j)
            todo.extend(children.get(j, ()))
        return sorted(out)

    @property
    def torso_length_mm(self) -> float:
        """Reference torso length used to normalise limb vectors in ``limb_vector`` mode."""
        if self.torso_joint is None:
            return float(max(self.ref_limb_length_mm))
        return float(sum(self.ref_limb_length_mm[k] for k in self.limb_path(self.torso_joint)))

    @property
    def ref_lengths(self) -> np.ndarray:
        return np.asarray(self.ref_limb_length_mm, dtype=np.float64)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.limb_width_px, dtype=np.float64)

    def to_json(self) -> dict:
        d = {
            "joints": list(self.joint_names),
            "parents": list(self.parent),
            "limbs": [list(l) for l in self.limbs],
            "widths_px": list(self.limb_width_px),
            "ref_lengths_mm": list(self.ref_limb_length_mm),
            "root": self.root_index,
        }
        if self.rest_directions is not None:
            d["rest_dirs"] = [list(v) for v in self.rest_directions]
        if self.torso_joint is not None:
            d["torso_joint"] = self.torso_joint
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SkeletonSpec":
        try:
            rest = d.get("rest_dirs")
            return cls(
                joint_names=tuple(str(s) for s in d["joints"]),
                parent=tuple(int(p) for p in d["parents"]),
                limbs=tuple((int(a), int(b)) for a, b in d["limbs"]),
                limb_width_px=tuple(float(w) for w in d["widths_px"]),
                ref_limb_length_mm=tuple(float(x) for x in d["ref_lengths_mm"]),
                root_index=int(d["root"]),
                rest_directions=None if rest is None else tuple(tuple(map(float, v)) for v in rest),
                torso_joint=d.get("torso_joint"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad skeleton config: {e!r}") from e


def load_skeleton(path: str | Path | None) -> SkeletonSpec:
    """Load a skeleton config file, or the built-in default when ``path`` is None."""
    if path is None:
        return default_h36m_skeleton()
    with open(path, encoding="utf-8") as f:
        return SkeletonSpec.from_json(json.load(f))


# 17-joint Human3.6M-style layout. Reference lengths are average adult
# proportions in mm; widths are in pixels of a 64x64 output map.
_H36M_JOINTS = (
    "pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle",
    "spine", "thorax", "neck", "head",
    "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist",
)
_H36M_PARENTS = (0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)
_H36M_LENGTHS = (
    132.9, 442.9, 454.2, 132.9, 442.9, 454.2,
    233.4, 257.1, 121.1, 115.0,
    151.0, 278.9, 251.7, 151.0, 278.9, 251.7,
)
_H36M_WIDTHS = (
    1.5, 2.0, 1.5, 1.5, 2.0, 1.5,
    2.0, 2.0, 1.5, 1.5,
    1.5, 1.5, 1.5, 1.5, 1.5, 1.5,
)
_LEFT, _RIGHT, _UP, _DOWN = (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 1.0, 0.0)
# T-pose facing the camera: subject's left is +x in the image.
_H36M_REST = (
    _RIGHT, _DOWN, _DOWN, _LEFT, _DOWN, _DOWN,
    _UP, _UP, _UP, _UP,
    _LEFT, _LEFT, _LEFT, _RIGHT, _RIGHT, _RIGHT,
)


def default_h36m_skeleton() -> SkeletonSpec:
    return SkeletonSpec(
        joint_names=_H36M_JOINTS,
        parent=_H36M_PARENTS,
        limbs=tuple((_H36M_PARENTS[j], j) for j in range(1, 17)),
        limb_width_px=_H36M_WIDTHS,
        ref_limb_length_mm=_H36M_LENGTHS,
        root_index=0,
        rest_directions=_H36M_REST,
        torso_joint=8,
    )


@dataclass(frozen=True)
class Pose3D:
    joints_mm: np.ndarray  # (N, 3)

    def __post_init__(self):
        arr = np.asarray(self.joints_mm, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"expected (N, 3) joints, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pose has non-finite coordinates")
        object.__setattr__(self, "joints_mm", arr)

    @property
    def n_joints(self) -> int:
        return self.joints_mm.shape[0]


@dataclass(frozen=True)
class LimbVectorSet:
    vectors: np.ndarray  # (K, 3)
    lengths_mm: np.ndarray  # (K,)
    orientations: np.ndarray  # (K, 3), NaN where the limb has zero length
    zero_length: np.ndarray  # (K,) bool flag


def pose_to_limb_vectors(pose: Pose3D, spec: SkeletonSpec) -> LimbVectorSet:
    j = pose.joints_mm
    if j.shape[0] != spec.n_joints:
        raise JointCountMismatch(f"pose has {j.shape[0]} joints, skeleton has {spec.n_joints}")
    vec = j[spec.limb_child] - j[spec.limb_parent]
    lengths = np.sqrt(np.sum(vec * vec, axis=1))
    zero = lengths < ZERO_LENGTH_MM
    with np.errstate(invalid="ignore", divide="ignore"):
        orient = vec / lengths[:, None]
    orient[zero] = np.nan
    return LimbVectorSet(vec, lengths, orient, zero)


def reconstruct_pose(
    orientations: np.ndarray,
    lengths_mm: Sequence[float],
    root_mm: Sequence[float],
    spec: SkeletonSpec,
) -> Pose3D:
    """Place joints along the tree from the root, one limb at a time.

    Raises:
        NonUnitOrientation: if any orientation's norm differs from 1 by more than 1e-6.
    """
    u = np.asarray(orientations, dtype=np.float64).reshape(spec.n_limbs, 3)
    lengths = np.asarray(lengths_mm, dtype=np.float64).reshape(spec.n_limbs)
    norms = np.linalg.norm(u, axis=1)
    bad = ~(np.abs(norms - 1.0) <= UNIT_TOL)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NonUnitOrientation(f"limb {k}: |orientation| = {norms[k]!r}")
    if np.any(lengths < 0):
        raise ValueError("limb lengths must be non-negative")
    joints = np.zeros((spec.n_joints, 3))
    joints[spec.root_index] = np.asarray(root_mm, dtype=np.float64)
    for k in spec.limb_order:
        a, b = spec.limbs[k]
        joints[b] = joints[a] + u[k] * lengths[k]
    return Pose3D(joints)
