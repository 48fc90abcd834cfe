import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from posecodec.camgeom import Keypoints2D
from posecodec.errors import BadMagic, CrcMismatch, FrameOrderError, JointCountMismatch, TruncatedFile
from posecodec.skeleton import Pose3D
from posecodec.tensorio import (load_heatmaps, load_orientation_maps, read_keypoints, read_maps,
                                read_poses, write_keypoints, write_maps, write_poses)


def test_round_trip_bit_exact(tmp_path, rng):
    arr = rng.normal(size=(4, 3, 6, 5)).astype("<f4")
    p = tmp_path / "m.posmap"
    write_maps(arr, p)
    back = read_maps(p)
    assert back.dtype == np.dtype("<f4") and back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(width=32, allow_nan=False)))
def test_round_trip_property(tmp_path_factory, arr):
    p = tmp_path_factory.mktemp("rt") / "m.posmap"
    write_maps(arr, p)
    assert read_maps(p).tobytes() == arr.astype("<f4").tobytes()


def test_header_layout(tmp_path):
    p = tmp_path / "m.posmap"
    write_maps(np.ones((2, 3), dtype=np.float32), p)
    raw = p.read_bytes()
    assert raw[:8] == b"POSMAP01" and raw[8:12] == b"f4le"
    assert struct.unpack_from("<3I", raw, 12) == (2, 2, 3)
    assert len(raw) == 8 + 4 + 4 + 8 + 24 + 4
    assert struct.unpack_from("<f", raw, 24)[0] == 1.0  # little-endian payload


def test_f64_container(tmp_path, rng):
    arr = rng.normal(size=(3, 4))
    p = tmp_path / "m.posmap"
    write_maps(arr, p, dtype="f64")
    assert read_maps(p).tobytes() == arr.astype("<f8").tobytes()


def test_corrupted_payload_detected(tmp_path, rng):
    p = tmp_path / "m.posmap"
    write_maps(rng.normal(size=(3, 8, 8)), p)
    raw = bytearray(p.read_bytes())
    for pos in (28, 100, len(raw) - 5):
        bad = bytearray(raw)
        bad[pos] ^= 0x40
        p.write_bytes(bytes(bad))
        with pytest.raises(CrcMismatch):
            read_maps(p)


def test_bad_magic(tmp_path):
    p = tmp_path / "m.posmap"
    p.write_bytes(b"NOTAMAP!" + bytes(20))
    with pytest.raises(BadMagic):
        read_maps(p)


def test_inconsistent_dims_truncated(tmp_path):
    p = tmp_path / "m.posmap"
    write_maps(np.zeros((2, 4, 4), dtype=np.float32), p)
    raw = bytearray(p.read_bytes())
    struct.pack_into("<I", raw, 16, 3)  # claim 3 maps
    p.write_bytes(bytes(raw))
    with pytest.raises(TruncatedFile):
        read_maps(p)
    p.write_bytes(bytes(raw[:30]))
    with pytest.raises(TruncatedFile):
        read_maps(p)


def test_stack_layouts(tmp_path, frames):
    f = frames[0]
    p = tmp_path / "o.posmap"
    write_maps([fr.orientation_maps for fr in frames[:3]], p, dtype="f64")
    assert read_maps(p).shape == (3, 16, 3, 64, 64)
    back = load_orientation_maps(p)
    np.testing.assert_array_equal(back[0].data, f.orientation_maps.data)
    write_maps(f.heatmaps, p, dtype="f64")
    assert read_maps(p).shape == (17, 64, 64)
    np.testing.assert_array_equal(load_heatmaps(p)[0].data, f.heatmaps.data)


def test_pose_round_trip(tmp_path, frames):
    p = tmp_path / "poses.ndjson"
    poses = [f.gt_pose for f in frames[:5]]
    write_poses(poses, p)
    idx, back = read_poses(p, 17)
    assert idx == [0, 1, 2, 3, 4]
    for a, b in zip(poses, back):
        assert np.max(np.abs(a.joints_mm - b.joints_mm)) < 1e-6
        np.testing.assert_array_equal(a.joints_mm, b.joints_mm)


def test_keypoint_round_trip(tmp_path):
    kp = Keypoints2D([[1.25, 2.5], [3.0, 4.0]], [True, False])
    p = tmp_path / "kp.ndjson"
    write_keypoints([kp, Keypoints2D.all_visible([[0.1, 0.2], [0.3, 0.4]])], p)
    _, back = read_keypoints(p, 2)
    np.testing.assert_array_equal(back[0].points_px, kp.points_px)
    assert list(back[0].visibility) == [True, False]
    assert back[1].visibility.all()


def test_out_of_order_frames(tmp_path):
    p = tmp_path / "poses.ndjson"
    write_poses([Pose3D(np.zeros((2, 3)))] * 2, p, frames=[3, 3])
    with pytest.raises(FrameOrderError):
        read_poses(p)


def test_joint_count_mismatch(tmp_path):
    p = tmp_path / "poses.ndjson"
    write_poses([Pose3D(np.zeros((16, 3)))], p)
    with pytest.raises(JointCountMismatch):
        read_poses(p, 17)
