import numpy as np
import pytest
from hypothesis import given, strategies as st

from posecodec.camgeom import Keypoints2D
from posecodec.decode import (FLAT_HEATMAP, angular_error_deg, argmax_keypoints, decode_pose,
                              read_limb_orientation)
from posecodec.encode import HeatmapStack, OrientationMapStack
from posecodec.errors import DegenerateOrientation, ShapeMismatch
from posecodec.metrics import mpjpe
from posecodec.skeleton import SkeletonSpec, pose_to_limb_vectors, reconstruct_pose
from posecodec.synth import decode_frame

ONE_LIMB = SkeletonSpec(("r", "c"), (0, 0), ((0, 1),), (2.0,), (100.0,))


def scan_argmax(m):
    best, where = -np.inf, None
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            if m[i, j] > best:
                best, where = m[i, j], (j, i)
    return where


def test_argmax_single_peak():
    m = np.zeros((1, 8, 8))
    m[0, 5, 3] = 1.0
    np.testing.assert_array_equal(argmax_keypoints(HeatmapStack(m)).points_px[0], [3, 5])


def test_argmax_tie_goes_to_first_in_row_major():
    m = np.zeros((1, 16, 16))
    m[0, 0, 0] = m[0, 10, 10] = 1.0
    np.testing.assert_array_equal(argmax_keypoints(HeatmapStack(m)).points_px[0], [0, 0])


def test_argmax_matches_exhaustive_scan(rng):
    m = rng.normal(size=(6, 20, 24))
    kp = argmax_keypoints(HeatmapStack(m))
    for n in range(6):
        assert tuple(kp.points_px[n]) == scan_argmax(m[n])


def test_flat_map_is_undetected():
    m = np.zeros((2, 4, 4))
    m[1, 2, 2] = 0.3
    kp = argmax_keypoints(HeatmapStack(m))
    assert list(kp.visibility) == [False, True]


def _one_limb_map(values, grid=(16, 16)):
    return OrientationMapStack(np.asarray(values, dtype=np.float64).reshape((1,) + grid + (3,)))


def test_constant_region_returns_exact_vector():
    u = np.array([0.48, -0.6, 0.64])
    data = np.zeros((1, 16, 16, 3))
    data[0, :, :] = u
    kp = Keypoints2D.all_visible([[4.5, 4.5], [10.5, 9.5]])
    got, support = read_limb_orientation(OrientationMapStack(data), kp, ONE_LIMB, 0)
    np.testing.assert_allclose(got, u / np.linalg.norm(u), atol=1e-15)
    assert support > 0


def test_half_and_half_region():
    data = np.zeros((1, 16, 16, 3))
    kp = Keypoints2D.all_visible([[4.0, 8.0], [12.0, 8.0]])  # capsule symmetric about row 8
    data[0, :8] = [1, 0, 0]
    data[0, 8:] = [0, 1, 0]
    got, _ = read_limb_orientation(OrientationMapStack(data), kp, ONE_LIMB, 0)
    np.testing.assert_allclose(got, np.array([1, 1, 0]) / np.sqrt(2), atol=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_background_zeros_do_not_change_direction(dx, dy):
    from posecodec.camgeom import rasterize_capsule

    u = np.array([0.0, 0.6, 0.8])
    data = np.zeros((1, 32, 32, 3))
    data[0][rasterize_capsule((10, 10), (20, 15), 2.0, (32, 32))] = u
    kp = Keypoints2D.all_visible([[10 + dx, 10 + dy], [20 + dx, 15 + dy]])
    got, _ = read_limb_orientation(OrientationMapStack(data), kp, ONE_LIMB, 0)
    np.testing.assert_allclose(got, u, atol=1e-12)


def test_all_zero_limb_raises_with_index(spec, frames):
    f = frames[0]
    o = f.orientation_maps.data.copy()
    o[5] = 0.0
    with pytest.raises(DegenerateOrientation) as ei:
        decode_pose(f.heatmaps, OrientationMapStack(o), spec)
    assert ei.value.limb == 5


def test_exact_maps_round_trip(spec, frames):
    for f in frames:
        res = decode_frame(f, spec, "gt")
        assert mpjpe(res.pose, f.gt_pose) < 1e-6
        assert np.max(np.abs(res.pose.joints_mm - f.gt_pose.joints_mm)) < 1e-6
        np.testing.assert_allclose(np.linalg.norm(res.orientations, axis=1), 1.0, atol=1e-12)
        assert res.warnings == ()


def test_mismatched_lengths_propagate_analytically(spec, frames, rng):
    for f in frames[:10]:
        lv = pose_to_limb_vectors(f.gt_pose, spec)
        lengths = lv.lengths_mm * rng.uniform(0.8, 1.2, size=spec.n_limbs)
        root = f.gt_pose.joints_mm[0]
        res = decode_pose(f.heatmaps, f.orientation_maps, spec, lengths, root)
        np.testing.assert_allclose(res.orientations, lv.orientations, atol=1e-12)
        ref = reconstruct_pose(lv.orientations, lengths, root, spec)
        np.testing.assert_allclose(res.pose.joints_mm, ref.joints_mm, atol=1e-9)


def test_reference_lengths_are_the_default(spec, frames):
    f = frames[0]
    a = decode_pose(f.heatmaps, f.orientation_maps, spec)
    b = decode_pose(f.heatmaps, f.orientation_maps, spec, spec.ref_lengths, (0, 0, 0))
    np.testing.assert_array_equal(a.pose.joints_mm, b.pose.joints_mm)


@pytest.mark.parametrize("c", [1e-3, 0.37, 1.0, 52.0])
def test_invariant_to_positive_map_scaling(spec, frames, c):
    f = frames[2]
    a = decode_pose(f.heatmaps, f.orientation_maps, spec)
    b = decode_pose(f.heatmaps, OrientationMapStack(c * f.orientation_maps.data), spec)
    np.testing.assert_allclose(a.orientations, b.orientations, atol=1e-12)


def test_crop_offset_robustness(spec, frames, rng):
    wmin = min(spec.limb_width_px)
    for f in frames[:10]:
        lv = pose_to_limb_vectors(f.gt_pose, spec)
        for _ in range(5):
            shift = rng.uniform(-wmin / 2, wmin / 2, size=2)
            kp = Keypoints2D.all_visible(f.gt_kp.points_px + shift)
            for k in range(spec.n_limbs):
                u, _ = read_limb_orientation(f.orientation_maps, kp, spec, k)
                assert np.linalg.norm(u - lv.orientations[k]) < 1e-6


def test_output_independent_of_bbox(spec, frames):
    from dataclasses import replace

    f = frames[3]
    g = replace(f, bbox=(0.0, 0.0, 1.0, 1.0))
    np.testing.assert_array_equal(decode_frame(f, spec).pose.joints_mm,
                                  decode_frame(g, spec).pose.joints_mm)


def test_flat_heatmap_warning(spec, frames):
    f = frames[0]
    h = f.heatmaps.data.copy()
    h[16] = 0.0  # right wrist: argmax falls back to the corner
    o = f.orientation_maps.data.copy()
    o[15] = 0.4  # give the dangling forearm limb something to read everywhere
    res = decode_pose(HeatmapStack(h), OrientationMapStack(o), spec)
    assert ("joint", 16, FLAT_HEATMAP) in res.warnings


def test_shape_mismatch(spec, frames):
    f = frames[0]
    with pytest.raises(ShapeMismatch):
        decode_pose(HeatmapStack(f.heatmaps.data[:, :32, :32]), f.orientation_maps, spec)


def test_monotone_noise_response(spec, frames):
    z = np.random.default_rng(5).standard_normal((len(frames),) + frames[0].orientation_maps.data.shape)
    medians = []
    for sigma in (0.0, 0.02, 0.05, 0.1, 0.2, 0.4):
        errs = []
        for f, zf in zip(frames, z):
            res = decode_pose(f.heatmaps, OrientationMapStack(f.orientation_maps.data + sigma * zf), spec)
            truth = pose_to_limb_vectors(f.gt_pose, spec).orientations
            errs.extend(angular_error_deg(res.orientations, truth))
        medians.append(np.median(errs))
    assert medians[0] < 1e-6
    assert all(b >= a for a, b in zip(medians, medians[1:]))
