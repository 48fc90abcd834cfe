"""Evaluation protocols: root-aligned MPJPE, Procrustes-aligned MPJPE, PCK and AUC."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateConfiguration, EmptyInput, JointCountMismatch
from .skeleton import Pose3D

PCK_THRESHOLD_MM = 150.0
AUC_THRESHOLDS_MM = tuple(float(t) for t in range(5, 151, 5))


def _joints(p) -> np.ndarray:
    return np.asarray(getattr(p, "joints_mm", p), dtype=np.float64)


def _pair(pred, gt):
    a, b = _joints(pred), _joints(gt)
    if a.shape != b.shape:
        raise JointCountMismatch(f"prediction has {a.shape[0]} joints, ground truth {b.shape[0]}")
    return a, b


def root_aligned_errors(pred, gt, root: int = 0) -> np.ndarray:
    """Per-joint Euclidean error (mm) after translating both roots to the origin."""
    a, b = _pair(pred, gt)
    d = (a - a[root]) - (b - b[root])
    return np.sqrt(np.sum(d * d, axis=-1))


def mpjpe(pred, gt, root: int = 0) -> float:
    return float(np.mean(root_aligned_errors(pred, gt, root)))


@dataclass(frozen=True)
class SimilarityTransform:
    rotation: np.ndarray  # (3, 3), proper
    scale: float
    translation: np.ndarray  # (3,)

    def apply(self, points) -> np.ndarray:
        return self.scale * _joints(points) @ self.rotation.T + self.translation


def procrustes_align(pred, gt) -> tuple[SimilarityTransform, Pose3D]:
    """Least-squares similarity transform taking ``pred`` onto ``gt``.

    Minimises sum ||s R pred_i + t - gt_i||^2 over proper rotations R
    (det +1), scales s > 0 and translations t.

    Raises:
        DegenerateConfiguration: if ``pred`` is collinear (rank < 2).
    """
    a, b = _pair(pred, gt)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    ac, bc = a - mu_a, b - mu_b
    sv = np.linalg.svd(ac, compute_uv=False)
    if a.shape[0] < 3 or sv[0] == 0 or sv[1] <= 1e-12 * sv[0]:
        raise DegenerateConfiguration("need at least three non-collinear joints")
    cov = bc.T @ ac / a.shape[0]
    u, d, vt = np.linalg.svd(cov)
    # flip the weakest axis when the unconstrained optimum is a reflection
    sign = 1.0 if np.linalg.det(u) * np.linalg.det(vt) >= 0 else -1.0
    s_diag = np.array([1.0, 1.0, sign])
    rot = (u * s_diag) @ vt
    var_a = np.mean(np.sum(ac * ac, axis=1))
    scale = float(np.sum(d * s_diag) / var_a)
    trans = mu_b - scale * rot @ mu_a
    tf = SimilarityTransform(rot, scale, trans)
    return tf, Pose3D(tf.apply(a))


def pa_errors(pred, gt) -> np.ndarray:
    _, aligned = procrustes_align(pred, gt)
    d = aligned.joints_mm - _joints(gt)
    return np.sqrt(np.sum(d * d, axis=-1))


def pa_mpjpe(pred, gt) -> float:
    return float(np.mean(pa_errors(pred, gt)))


def pck(errors_mm, threshold_mm: float = PCK_THRESHOLD_MM) -> float:
    """Fraction of joint errors at or below the threshold."""
    e = np.asarray(errors_mm, dtype=np.float64).ravel()
    if e.size == 0:
        raise EmptyInput("no errors to score")
    if not threshold_mm > 0:
        raise ValueError("threshold must be positive")
    return float(np.count_nonzero(e <= threshold_mm)) / e.size


def auc(errors_mm, thresholds_mm: Sequence[float] = AUC_THRESHOLDS_MM) -> float:
    """Mean PCK over the threshold grid (default 5, 10, ..., 150 mm)."""
    e = np.asarray(errors_mm, dtype=np.float64).ravel()
    if e.size == 0:
        raise EmptyInput("no errors to score")
    e = np.sort(e)
    counts = np.searchsorted(e, np.asarray(thresholds_mm, dtype=np.float64), side="right")
    # one integer ratio, so the result is the correctly rounded exact value
    return int(counts.sum()) / (len(thresholds_mm) * e.size)


@dataclass(frozen=True)
class EvalReport:
    mpjpe_mm: float
    pa_mpjpe_mm: float
    pck: float
    auc: float
    per_joint_mm: list[float]
    n_frames: int

    def to_json(self) -> dict:
        return asdict(self)


def evaluate(preds: Sequence, gts: Sequence, root: int = 0,
             threshold_mm: float = PCK_THRESHOLD_MM,
             thresholds_mm: Sequence[float] = AUC_THRESHOLDS_MM) -> EvalReport:
    """Score a sequence of predicted poses against ground truth.

    PCK and AUC are computed on the pooled root-aligned joint errors.
    """
    if len(preds) != len(gts):
        raise JointCountMismatch(f"{len(preds)} predicted frames vs {len(gts)} ground-truth frames")
    if not preds:
        raise EmptyInput("no frames to evaluate")
    errs = np.stack([root_aligned_errors(p, g, root) for p, g in zip(preds, gts)])
    pa = np.array([pa_mpjpe(p, g) for p, g in zip(preds, gts)])
    return EvalReport(
        mpjpe_mm=float(errs.mean()),
        pa_mpjpe_mm=float(pa.mean()),
        pck=pck(errs, threshold_mm),
        auc=auc(errs, thresholds_mm),
        per_joint_mm=[float(x) for x in errs.mean(axis=0)],
        n_frames=len(preds),
    )
