"""Synthetic stand-in for a trained network.

Samples poses, projects them, renders exact target maps and optionally
corrupts them with Gaussian noise, so the decoding and evaluation pipeline
can be exercised end to end without images or datasets. Also hosts the
decode-window jitter/rescale robustness protocol.

Randomness comes from numpy's Philox counter-based generator. Every frame
gets its own streams keyed by (seed, frame index, stream id), so frames can
be generated in any order or in parallel with identical results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .camgeom import CameraModel, Keypoints2D, project, to_map_coords
from .decode import DecodeResult, decode_pose
from .encode import (DEFAULT_MAP_SIZE, DEFAULT_SIGMA_PX, MODES, HeatmapStack,
                     OrientationMapStack, render_heatmaps, render_orientation_maps)
from .errors import DegenerateOrientation, FormatError, SkeletonError
from .metrics import AUC_THRESHOLDS_MM, PCK_THRESHOLD_MM, auc, pck, root_aligned_errors
from .skeleton import Pose3D, SkeletonSpec, pose_to_limb_vectors

STREAM_POSE = 0
STREAM_ORIENT_NOISE = 1
STREAM_HEATMAP_NOISE = 2
STREAM_JITTER = 3

POSE_DEPTH_MM = 2500.0
BBOX_PAD = 0.10
MAX_RESAMPLES = 64


def make_rng(seed: int, frame: int = 0, stream: int = 0) -> np.random.Generator:
    """Philox generator for one (seed, frame, stream) triple."""
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, int(frame), int(stream)])
    return np.random.Generator(bitgen)


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("POSECODEC_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items: Sequence) -> list:
    """Order-preserving map, threaded up to POSECODEC_THREADS workers."""
    workers = n_threads()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class PosePrior:
    kind: str = "random_angles"  # "tpose" | "random_angles"
    max_deg: float = 30.0

    def __post_init__(self):
        if self.kind not in ("tpose", "random_angles"):
            raise ValueError(f"unknown pose prior {self.kind!r}")
        if self.max_deg < 0:
            raise ValueError("max_deg must be non-negative")
        if self.kind == "tpose":
            object.__setattr__(self, "max_deg", 0.0)

    @classmethod
    def from_json(cls, d) -> "PosePrior":
        if d == "tpose":
            return cls("tpose", 0.0)
        if isinstance(d, dict) and "random_angles" in d:
            return cls("random_angles", float(d["random_angles"]))
        if isinstance(d, dict):
            return cls(str(d.get("kind", "random_angles")), float(d.get("max_deg", 30.0)))
        raise ValueError(f"bad pose prior {d!r}")

    def to_json(self):
        return "tpose" if self.kind == "tpose" else {"random_angles": self.max_deg}


def default_camera() -> CameraModel:
    return CameraModel(fx=200.0, fy=200.0, cx=128.0, cy=128.0, image_w=256, image_h=256)


@dataclass(frozen=True)
class SynthScenario:
    seed: int = 0
    n_frames: int = 100
    camera: CameraModel = field(default_factory=default_camera)
    map_size: tuple[int, int] = DEFAULT_MAP_SIZE
    noise_sigma: float = 0.0  # additive noise on orientation maps
    heatmap_noise_sigma: float = 0.0
    jitter_px: float = 0.0  # image pixels
    rescale_range: float = 0.0
    pose_prior: PosePrior = field(default_factory=PosePrior)
    sigma_px: float = DEFAULT_SIGMA_PX
    mode: str = "orientation"
    map_dtype: str = "f32"

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        for name in ("noise_sigma", "heatmap_noise_sigma", "jitter_px", "rescale_range"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_json(cls, d: dict) -> "SynthScenario":
        try:
            kw = {}
            for key, conv in (("seed", int), ("n_frames", int), ("noise_sigma", float),
                              ("heatmap_noise_sigma", float), ("jitter_px", float),
                              ("rescale_range", float), ("sigma_px", float),
                              ("mode", str), ("map_dtype", str)):
                if key in d:
                    kw[key] = conv(d[key])
            if "camera" in d:
                kw["camera"] = CameraModel.from_json(d["camera"])
            if "map_size" in d:
                h, w = d["map_size"]
                kw["map_size"] = (int(h), int(w))
            if "pose_prior" in d:
                kw["pose_prior"] = PosePrior.from_json(d["pose_prior"])
            return cls(**kw)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad scenario: {e}") from e

    def to_json(self) -> dict:
        return {
            "seed": self.seed, "n_frames": self.n_frames, "camera": self.camera.to_json(),
            "map_size": list(self.map_size), "noise_sigma": self.noise_sigma,
            "heatmap_noise_sigma": self.heatmap_noise_sigma, "jitter_px": self.jitter_px,
            "rescale_range": self.rescale_range, "pose_prior": self.pose_prior.to_json(),
            "sigma_px": self.sigma_px, "mode": self.mode, "map_dtype": self.map_dtype,
        }


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    x, y, z = np.asarray(axis, dtype=np.float64) / np.linalg.norm(axis)
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    return np.eye(3) + s * k + (1 - c) * (k @ k)


def _random_rotation(rng: np.random.Generator, max_rad: float) -> np.ndarray:
    axis = rng.standard_normal(3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.standard_normal(3)
    return axis_angle_matrix(axis, rng.uniform(0.0, max_rad))


def sample_pose(prior: PosePrior, spec: SkeletonSpec, rng: np.random.Generator) -> Pose3D:
    """Draw a pose by forward kinematics over the reference limb lengths.

    Each limb's rest direction is rotated by its parent limb's accumulated
    rotation and then by its own random rotation (uniform angle up to
    ``max_deg`` about a uniformly random axis). The root carries one more
    such rotation. The result is translated so the joint centroid sits on the
    optical axis at 2.5 m depth.
    """
    if spec.rest_directions is None:
        raise SkeletonError("skeleton has no rest directions; cannot sample poses")
    rest = np.asarray(spec.rest_directions, dtype=np.float64)
    rest = rest / np.linalg.norm(rest, axis=1, keepdims=True)
    lengths = spec.ref_lengths
    random = prior.kind == "random_angles" and prior.max_deg > 0
    max_rad = np.radians(prior.max_deg)

    joint_rot = {spec.root_index: _random_rotation(rng, max_rad) if random else np.eye(3)}
    joints = np.zeros((spec.n_joints, 3))
    for k in spec.limb_order:
        a, b = spec.limbs[k]
        rot = joint_rot[a] @ _random_rotation(rng, max_rad) if random else joint_rot[a]
        joint_rot[b] = rot
        joints[b] = joints[a] + lengths[k] * (rot @ rest[k])
    joints += np.array([0.0, 0.0, POSE_DEPTH_MM]) - joints.mean(axis=0)
    return Pose3D(joints)


@dataclass(frozen=True)
class FrameRecord:
    index: int
    gt_pose: Pose3D
    gt_kp: Keypoints2D  # output-map pixel units
    heatmaps: HeatmapStack
    orientation_maps: OrientationMapStack
    bbox: tuple[float, float, float, float]  # (x, y, w, h) in image pixels


def _bbox(points: np.ndarray) -> tuple[float, float, float, float]:
    lo, hi = points.min(axis=0), points.max(axis=0)
    pad = (hi - lo) * BBOX_PAD
    lo, hi = lo - pad, hi + pad
    return (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))


def generate_frame(scenario: SynthScenario, spec: SkeletonSpec, index: int) -> FrameRecord:
    rng = make_rng(scenario.seed, index, STREAM_POSE)
    cam = scenario.camera
    # resample until the whole skeleton lands inside the image
    for _ in range(MAX_RESAMPLES):
        pose = sample_pose(scenario.pose_prior, spec, rng)
        if np.all(pose.joints_mm[:, 2] > 0):
            kp_img = project(pose, cam)
            if kp_img.visibility.all():
                break
    else:
        kp_img = project(pose, cam)
    kp = to_map_coords(kp_img, cam, scenario.map_size)
    heat = render_heatmaps(kp, scenario.sigma_px, scenario.map_size)
    omap = render_orientation_maps(pose, kp, spec, scenario.map_size, scenario.mode)
    hdata, odata = heat.data, omap.data
    if scenario.noise_sigma > 0:
        z = make_rng(scenario.seed, index, STREAM_ORIENT_NOISE).standard_normal(odata.shape)
        odata = odata + scenario.noise_sigma * z
    if scenario.heatmap_noise_sigma > 0:
        z = make_rng(scenario.seed, index, STREAM_HEATMAP_NOISE).standard_normal(hdata.shape)
        hdata = hdata + scenario.heatmap_noise_sigma * z
    return FrameRecord(
        index=index,
        gt_pose=pose,
        gt_kp=kp,
        heatmaps=HeatmapStack(hdata),
        orientation_maps=OrientationMapStack(odata, omap.mode, omap.flags),
        bbox=_bbox(kp_img.points_px),
    )


def generate(scenario: SynthScenario, spec: SkeletonSpec) -> list[FrameRecord]:
    return parallel_map(lambda i: generate_frame(scenario, spec, i), range(scenario.n_frames))


def gt_lengths(frame: FrameRecord, spec: SkeletonSpec) -> np.ndarray:
    return pose_to_limb_vectors(frame.gt_pose, spec).lengths_mm


def decode_frame(frame: FrameRecord, spec: SkeletonSpec, lengths: str = "gt",
                 heatmaps: HeatmapStack | None = None,
                 orientation_maps: OrientationMapStack | None = None) -> DecodeResult:
    """Decode a synthetic frame with the ground-truth root.

    ``lengths`` is "gt" (per-frame true limb lengths) or "ref" (skeleton
    reference lengths). Alternative map stacks may be supplied in place of
    the frame's own, e.g. after window resampling.
    """
    if lengths not in ("gt", "ref"):
        raise ValueError("lengths must be 'gt' or 'ref'")
    lens = gt_lengths(frame, spec) if lengths == "gt" else spec.ref_lengths
    root = frame.gt_pose.joints_mm[spec.root_index]
    heat = frame.heatmaps if heatmaps is None else heatmaps
    omap = frame.orientation_maps if orientation_maps is None else orientation_maps
    return decode_pose(heat, omap, spec, lens, root)


def resample_window(data: np.ndarray, center: tuple[float, float], shift: tuple[float, float],
                    scale: float) -> np.ndarray:
    """Nearest-neighbour resample of (..., H, W[, C]) maps onto a moved/rescaled window.

    ``center`` and ``shift`` are (x, y) in map pixels. Output pixel center u
    reads source coordinate ``center + (u - center) * scale + shift``;
    samples falling outside the source grid are zero.
    """
    channels_last = data.ndim == 4 and data.shape[-1] == 3
    h, w = (data.shape[-3], data.shape[-2]) if channels_last else data.shape[-2:]
    cx, cy = center
    xs = cx + (np.arange(w) + 0.5 - cx) * scale + shift[0]
    ys = cy + (np.arange(h) + 0.5 - cy) * scale + shift[1]
    ix = np.floor(xs).astype(np.intp)
    iy = np.floor(ys).astype(np.intp)
    okx = (ix >= 0) & (ix < w)
    oky = (iy >= 0) & (iy < h)
    ix, iy = np.clip(ix, 0, w - 1), np.clip(iy, 0, h - 1)
    if channels_last:
        out = data[:, iy][:, :, ix]
        out = out * (oky[:, None] & okx[None, :])[None, :, :, None]
    else:
        out = data[:, iy][:, :, ix]
        out = out * (oky[:, None] & okx[None, :])[None]
    return out


@dataclass
class JitterReport:
    jitter_px: float
    rescale_range: float
    trials: int
    n_frames: int
    lengths: str
    baseline_pck: float
    baseline_auc: float
    trial_pck: list[float]
    trial_auc: list[float]
    failed_decodes: int
    max_orientation_change: float  # max |u_trial - u_base| over decodable limbs

    @property
    def pck_mean(self) -> float:
        return float(np.mean(self.trial_pck))

    @property
    def pck_std(self) -> float:
        return float(np.std(self.trial_pck))

    @property
    def auc_mean(self) -> float:
        return float(np.mean(self.trial_auc))

    @property
    def auc_std(self) -> float:
        return float(np.std(self.trial_auc))

    def to_json(self) -> dict:
        return {
            "jitter_px": self.jitter_px, "rescale_range": self.rescale_range,
            "trials": self.trials, "n_frames": self.n_frames, "lengths": self.lengths,
            "baseline": {"pck": self.baseline_pck, "auc": self.baseline_auc},
            "jittered": {"pck_mean": self.pck_mean, "pck_std": self.pck_std,
                         "auc_mean": self.auc_mean, "auc_std": self.auc_std,
                         "trial_pck": self.trial_pck, "trial_auc": self.trial_auc},
            "pck_drop": self.baseline_pck - self.pck_mean,
            "auc_drop": self.baseline_auc - self.auc_mean,
            "failed_decodes": self.failed_decodes,
            "max_orientation_change": self.max_orientation_change,
        }

    def summary(self) -> str:
        """One-line result in the "PCK mean+-std (drop)" reporting style, in percent."""
        def pct(x, digits=1):
            return f"{round(100 * x, digits) + 0.0:.{digits}f}"  # + 0.0 drops a "-0.0"

        return (f"PCK {pct(self.pck_mean)}±{pct(self.pck_std, 2)} "
                f"(↓{pct(self.baseline_pck - self.pck_mean)})  "
                f"AUC {pct(self.auc_mean)}±{pct(self.auc_std, 2)} "
                f"(↓{pct(self.baseline_auc - self.auc_mean)})")


def _frame_errors(frame, spec, lengths, heat=None, omap=None):
    try:
        res = decode_frame(frame, spec, lengths, heat, omap)
    except DegenerateOrientation:
        return None, np.full(spec.n_joints, np.inf)
    return res, root_aligned_errors(res.pose, frame.gt_pose, spec.root_index)


def jitter_protocol(frames: Sequence[FrameRecord], spec: SkeletonSpec, cam: CameraModel,
                    jitter_px: float, rescale_range: float, trials: int,
                    rng: np.random.Generator, lengths: str = "gt",
                    threshold_mm: float = PCK_THRESHOLD_MM,
                    thresholds_mm: Sequence[float] = AUC_THRESHOLDS_MM) -> JitterReport:
    """Decode every frame through randomly perturbed decode windows.

    Each trial draws, per frame, a window offset uniform in
    [-jitter_px, jitter_px]^2 (image pixels) and a scale factor uniform in
    [1 - rescale_range, 1 + rescale_range] about the bounding-box center,
    resamples both map stacks onto that window and decodes. A frame whose
    decode degenerates counts as all joints missed.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not frames:
        raise ValueError("no frames")
    base = [_frame_errors(f, spec, lengths) for f in frames]
    base_err = np.stack([e for _, e in base])

    trial_pck, trial_auc = [], []
    failed = 0
    max_change = 0.0
    for _ in range(trials):
        draws = [(rng.uniform(-jitter_px, jitter_px), rng.uniform(-jitter_px, jitter_px),
                  rng.uniform(1 - rescale_range, 1 + rescale_range)) for _ in frames]
        errs = []
        for f, (dx, dy, s), (bres, _) in zip(frames, draws, base):
            h, w = f.heatmaps.resolution
            fx, fy = w / cam.image_w, h / cam.image_h
            bx, by, bw, bh = f.bbox
            center = ((bx + bw / 2) * fx, (by + bh / 2) * fy)
            shift = (dx * fx, dy * fy)
            heat = HeatmapStack(resample_window(f.heatmaps.data, center, shift, s))
            omap = replace(f.orientation_maps,
                           data=resample_window(f.orientation_maps.data, center, shift, s))
            res, e = _frame_errors(f, spec, lengths, heat, omap)
            if res is None:
                failed += 1
            elif bres is not None:
                change = np.max(np.linalg.norm(res.orientations - bres.orientations, axis=1))
                max_change = max(max_change, float(change))
            errs.append(e)
        errs = np.stack(errs)
        trial_pck.append(pck(errs, threshold_mm))
        trial_auc.append(auc(errs, thresholds_mm))

    return JitterReport(
        jitter_px=float(jitter_px), rescale_range=float(rescale_range), trials=trials,
        n_frames=len(frames), lengths=lengths,
        baseline_pck=pck(base_err, threshold_mm), baseline_auc=auc(base_err, thresholds_mm),
        trial_pck=trial_pck, trial_auc=trial_auc, failed_decodes=failed,
        max_orientation_change=max_change,
    )


def median_mpjpe(frames: Sequence[FrameRecord], spec: SkeletonSpec, lengths: str = "gt") -> float:
    errs = parallel_map(lambda f: float(np.mean(_frame_errors(f, spec, lengths)[1])), frames)
    return float(np.median(errs))


def ablation_sweep(scenario: SynthScenario, spec: SkeletonSpec,
                   sigmas: Sequence[float] = (0.05, 0.1, 0.2),
                   lengths: str = "gt") -> list[dict]:
    """Median MPJPE of orientation vs limb_vector encodings over a noise sweep.

    Both encodings see the same poses and the same noise draws.
    """
    rows = []
    for sigma in sigmas:
        row = {"noise_sigma": float(sigma)}
        for mode in MODES:
            frames = generate(replace(scenario, noise_sigma=float(sigma), mode=mode), spec)
            row[mode] = median_mpjpe(frames, spec, lengths)
        rows.append(row)
    return rows
