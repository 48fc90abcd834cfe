"""File formats: binary map containers and newline-delimited JSON pose files.

Map container layout (all integers little-endian uint32)::

    magic    8 bytes  b"POSMAP01"
    dtype    4 bytes  b"f4le" (float32) or b"f8le" (float64)
    rank     uint32
    dims     rank x uint32
    payload  prod(dims) values, row-major, little-endian
    crc32    uint32 of the payload bytes

Orientation stacks are stored channel-first (K x 3 x H x W, or
F x K x 3 x H x W for a batch of frames); heatmaps as N x H x W
(or F x N x H x W).
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from pathlib import Path
from typing import Sequence

import numpy as np

from .camgeom import Keypoints2D
from .encode import HeatmapStack, OrientationMapStack
from .errors import BadMagic, CrcMismatch, FormatError, FrameOrderError, JointCountMismatch, TruncatedFile
from .skeleton import Pose3D

MAGIC = b"POSMAP01"
DTYPES = {b"f4le": np.dtype("<f4"), b"f8le": np.dtype("<f8")}
DTYPE_TAGS = {"f32": b"f4le", "f64": b"f8le"}


def _as_array(stack) -> np.ndarray:
    if isinstance(stack, OrientationMapStack):
        return np.moveaxis(stack.data, -1, 1)  # K,H,W,3 -> K,3,H,W
    if isinstance(stack, HeatmapStack):
        return stack.data
    if isinstance(stack, (list, tuple)) and stack and not isinstance(stack[0], (int, float)):
        return np.stack([_as_array(s) for s in stack])
    return np.asarray(stack)


def write_maps(stack, path, dtype: str = "f32") -> None:
    """Write a stack, a list of per-frame stacks, or a raw array to ``path``."""
    arr = _as_array(stack)
    if arr.ndim == 0 or 0 in arr.shape:
        raise ValueError("map dims must be nonzero")
    tag = DTYPE_TAGS[dtype]
    payload = np.ascontiguousarray(arr, dtype=DTYPES[tag]).tobytes()
    header = MAGIC + tag + struct.pack(f"<{arr.ndim + 1}I", arr.ndim, *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload)))


def read_maps(path) -> np.ndarray:
    """Read a container back as an array with its stored dtype and dims.

    Raises:
        BadMagic, TruncatedFile, CrcMismatch
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise BadMagic(f"{path}: not a POSMAP01 container")
    tag = raw[8:12]
    if tag not in DTYPES:
        raise FormatError(f"{path}: unknown dtype tag {tag!r}")
    dt = DTYPES[tag]
    (rank,) = struct.unpack_from("<I", raw, 12)
    off = 16 + 4 * rank
    if rank == 0 or len(raw) < off:
        raise TruncatedFile(f"{path}: header truncated")
    dims = struct.unpack_from(f"<{rank}I", raw, 16)
    nbytes = math.prod(dims) * dt.itemsize
    if len(raw) != off + nbytes + 4:
        raise TruncatedFile(f"{path}: expected {off + nbytes + 4} bytes for dims {dims}, found {len(raw)}")
    payload = raw[off:off + nbytes]
    (crc,) = struct.unpack_from("<I", raw, off + nbytes)
    if zlib.crc32(payload) != crc:
        raise CrcMismatch(f"{path}: payload checksum mismatch")
    return np.frombuffer(payload, dtype=dt).reshape(dims).copy()


def load_heatmaps(path) -> list[HeatmapStack]:
    arr = read_maps(path).astype(np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise FormatError(f"{path}: heatmaps must be N x H x W or F x N x H x W")
    return [HeatmapStack(a) for a in arr]


def load_orientation_maps(path, mode: str = "orientation") -> list[OrientationMapStack]:
    arr = read_maps(path).astype(np.float64)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5 or arr.shape[2] != 3:
        raise FormatError(f"{path}: orientation maps must be K x 3 x H x W or F x K x 3 x H x W")
    return [OrientationMapStack(np.moveaxis(a, 1, -1).copy(), mode) for a in arr]


def write_poses(poses: Sequence[Pose3D], path, frames: Sequence[int] | None = None) -> None:
    """One JSON object per line: {"frame": i, "joints_mm": [[x, y, z], ...]}.

    Floats are written with repr, so text round-trips are exact.
    """
    frames = range(len(poses)) if frames is None else frames
    with open(path, "w", encoding="utf-8") as f:
        for i, p in zip(frames, poses):
            rec = {"frame": int(i), "joints_mm": p.joints_mm.tolist()}
            f.write(json.dumps(rec) + "\n")


def write_keypoints(kps: Sequence[Keypoints2D], path, frames: Sequence[int] | None = None) -> None:
    frames = range(len(kps)) if frames is None else frames
    with open(path, "w", encoding="utf-8") as f:
        for i, kp in zip(frames, kps):
            rec = {"frame": int(i), "keypoints_px": kp.points_px.tolist()}
            if not kp.visibility.all():
                rec["visible"] = kp.visibility.tolist()
            f.write(json.dumps(rec) + "\n")


def _read_records(path, key: str, n_joints: int | None, width: int):
    frames, rows, extra = [], [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                frame = int(rec["frame"])
                arr = np.asarray(rec[key], dtype=np.float64)
            except (ValueError, KeyError, TypeError) as e:
                raise FormatError(f"{path}:{lineno}: bad record ({e})") from e
            if arr.ndim != 2 or arr.shape[1] != width:
                raise FormatError(f"{path}:{lineno}: {key} must be a list of {width}-element rows")
            if n_joints is not None and arr.shape[0] != n_joints:
                raise JointCountMismatch(
                    f"{path}:{lineno}: {arr.shape[0]} joints, skeleton has {n_joints}")
            if frames and frame <= frames[-1]:
                raise FrameOrderError(f"{path}:{lineno}: frame {frame} after {frames[-1]}")
            frames.append(frame)
            rows.append(arr)
            extra.append(rec)
    return frames, rows, extra


def read_poses(path, n_joints: int | None = None) -> tuple[list[int], list[Pose3D]]:
    """Returns (frame indices, poses).

    Raises:
        FrameOrderError: if frame indices are not strictly increasing.
        JointCountMismatch: if ``n_joints`` is given and a record disagrees.
    """
    frames, rows, _ = _read_records(path, "joints_mm", n_joints, 3)
    return frames, [Pose3D(r) for r in rows]


def read_keypoints(path, n_joints: int | None = None) -> tuple[list[int], list[Keypoints2D]]:
    frames, rows, recs = _read_records(path, "keypoints_px", n_joints, 2)
    kps = [Keypoints2D(r, rec.get("visible")) for r, rec in zip(rows, recs)]
    return frames, kps
