"""Limb-orientation maps for monocular 3D human pose.

Encode poses into per-joint heatmaps and per-limb orientation maps, decode
maps back into 3D poses along the skeleton tree, compute the training
losses, and score results with MPJPE / PA-MPJPE / PCK / AUC.
"""

from .camgeom import CameraModel, Keypoints2D, project, rasterize_capsule
from .decode import DecodeResult, argmax_keypoints, decode_pose, read_limb_orientation
from .encode import HeatmapStack, OrientationMapStack, render_heatmaps, render_orientation_maps
from .losses import LossReport, heatmap_loss, orientation_loss, total_loss
from .metrics import EvalReport, SimilarityTransform, auc, evaluate, mpjpe, pa_mpjpe, pck, procrustes_align
from .skeleton import (LimbVectorSet, Pose3D, SkeletonSpec, default_h36m_skeleton,
                       pose_to_limb_vectors, reconstruct_pose)
from .synth import FrameRecord, SynthScenario, decode_frame, generate, jitter_protocol

__version__ = "0.1.0"
