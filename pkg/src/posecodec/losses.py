"""Training losses with analytic gradients.

Both losses take plain arrays or stacks. The orientation loss is a raw sum
over limbs, pixels and channels (no averaging); the heatmap loss is the
binary cross-entropy on post-sigmoid probabilities, summed over pixels and
averaged over joints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

DEFAULT_LAMBDA = 0.2
PROB_EPS = 1e-12


def _arr(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def _check(pred, gt):
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {gt.shape}")


def orientation_loss(pred, gt) -> tuple[float, np.ndarray]:
    """Squared L2 distance between orientation map stacks; gradient is w.r.t. ``pred``."""
    p, g = _arr(pred), _arr(gt)
    _check(p, g)
    diff = p - g
    return float(np.sum(diff * diff)), 2.0 * diff


def heatmap_loss(pred_prob, gt) -> tuple[float, np.ndarray]:
    """Cross-entropy of predicted probabilities against target heatmaps.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before taking logs; the
    returned gradient (w.r.t. ``pred_prob``) is zero where the clamp is active.
    """
    p, g = _arr(pred_prob), _arr(gt)
    _check(p, g)
    n = p.shape[0] if p.ndim == 3 else 1
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = -np.sum(g * np.log(pc) + (1.0 - g) * np.log1p(-pc)) / n
    grad = -(g / pc - (1.0 - g) / (1.0 - pc)) / n
    grad = np.where((p >= PROB_EPS) & (p <= 1.0 - PROB_EPS), grad, 0.0)
    return float(loss), grad


@dataclass(frozen=True)
class LossReport:
    orientation_loss: float
    heatmap_loss: float
    total: float
    lam: float


def total_loss(pred_o, gt_o, pred_p, gt_p, lam: float = DEFAULT_LAMBDA) -> LossReport:
    lo, _ = orientation_loss(pred_o, gt_o)
    lp, _ = heatmap_loss(pred_p, gt_p)
    return LossReport(lo, lp, lo + lam * lp, lam)


def total_loss_grads(pred_o, gt_o, pred_p, gt_p, lam: float = DEFAULT_LAMBDA):
    """Gradients of the combined loss w.r.t. both predictions."""
    _, go = orientation_loss(pred_o, gt_o)
    _, gp = heatmap_loss(pred_p, gt_p)
    return go, lam * gp
