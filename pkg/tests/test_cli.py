import json
import subprocess
import sys

import numpy as np
import pytest

from posecodec.cli import run
from posecodec.tensorio import read_maps, read_poses, write_poses
from posecodec.skeleton import Pose3D


def write_scenario(path, **kw):
    d = {"seed": 8, "n_frames": 12, "pose_prior": {"random_angles": 30}, "map_dtype": "f64"}
    d.update(kw)
    path.write_text(json.dumps(d), encoding="utf-8")
    return path


@pytest.fixture
def synth_dir(tmp_path):
    sc = write_scenario(tmp_path / "sc.json")
    out = tmp_path / "data"
    assert run(["synth", "--scenario", str(sc), "--out", str(out)]) == 0
    return out


def test_synth_outputs(synth_dir):
    for name in ("poses.ndjson", "keypoints.ndjson", "heatmaps.posmap", "orient.posmap", "frames.json"):
        assert (synth_dir / name).exists()
    assert read_maps(synth_dir / "orient.posmap").shape == (12, 16, 3, 64, 64)
    meta = json.loads((synth_dir / "frames.json").read_text())
    assert meta["config"]["lambda"] == 0.2 and len(meta["frames"]) == 12


def test_decode_then_eval_is_exact_with_gt_lengths(synth_dir, tmp_path, capsys):
    pred = tmp_path / "pred.ndjson"
    gt = synth_dir / "poses.ndjson"
    assert run(["decode", "--heatmaps", str(synth_dir / "heatmaps.posmap"),
                "--orient", str(synth_dir / "orient.posmap"),
                "--lengths", f"gt:{gt}", "--out", str(pred)]) == 0
    report = tmp_path / "report.json"
    assert run(["eval", "--pred", str(pred), "--gt", str(gt), "--report", str(report)]) == 0
    rep = json.loads(report.read_text())
    assert rep["mpjpe_mm"] < 1e-6
    assert rep["pck"] == 1.0
    assert rep["config"]["auc_thresholds_mm"][0] == 5.0
    assert "MPJPE (mm)" in capsys.readouterr().out


def test_f32_maps_lose_only_float_precision(tmp_path):
    sc = write_scenario(tmp_path / "sc.json", map_dtype="f32")
    out = tmp_path / "d"
    assert run(["synth", "--scenario", str(sc), "--out", str(out)]) == 0
    pred = tmp_path / "pred.ndjson"
    assert run(["decode", "--heatmaps", str(out / "heatmaps.posmap"), "--orient", str(out / "orient.posmap"),
                "--lengths", "ref", "--root", f"gt:{out / 'poses.ndjson'}", "--out", str(pred)]) == 0
    _, p = read_poses(pred)
    _, g = read_poses(out / "poses.ndjson")
    worst = max(np.max(np.abs(a.joints_mm - b.joints_mm)) for a, b in zip(p, g))
    assert worst < 1e-3


def test_encode_reproduces_synth_maps(synth_dir, tmp_path):
    out = tmp_path / "enc"
    assert run(["encode", "--poses", str(synth_dir / "poses.ndjson"),
                "--keypoints", str(synth_dir / "keypoints.ndjson"),
                "--out", str(out), "--dtype", "f64"]) == 0
    for name in ("heatmaps.posmap", "orient.posmap"):
        assert (out / name).read_bytes() == (synth_dir / name).read_bytes()


def test_encode_options(synth_dir, tmp_path):
    out = tmp_path / "enc"
    assert run(["encode", "--poses", str(synth_dir / "poses.ndjson"),
                "--keypoints", str(synth_dir / "keypoints.ndjson"), "--out", str(out),
                "--mode", "limb_vector", "--sigma", "1.5", "--map-size", "64x64"]) == 0
    meta = json.loads((out / "encode.json").read_text())
    assert meta["config"]["mode"] == "limb_vector" and meta["config"]["sigma_px"] == 1.5


def test_eval_joint_count_mismatch_exit_2(tmp_path, capsys):
    a, b = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    write_poses([Pose3D(np.zeros((17, 3)))], a)
    write_poses([Pose3D(np.zeros((16, 3)))], b)
    assert run(["eval", "--pred", str(a), "--gt", str(b), "--report", str(tmp_path / "r.json")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "JointCountMismatch" in err[0]


def test_bad_flags_exit_3(capsys):
    assert run(["decode", "--heatmaps", "x"]) == 3
    assert run(["frobnicate"]) == 3
    assert run(["encode", "--poses", "a", "--keypoints", "b", "--out", "c", "--map-size", "64by64"]) == 3
    assert run(["decode", "--heatmaps", "h", "--orient", "o", "--lengths", "nope", "--out", "p"]) in (2, 3)


def test_missing_file_exit_2(tmp_path):
    assert run(["eval", "--pred", str(tmp_path / "nope"), "--gt", str(tmp_path / "nope"),
                "--report", str(tmp_path / "r.json")]) == 2


def test_degenerate_decode_exit_1(synth_dir, tmp_path):
    from posecodec.tensorio import write_maps

    o = read_maps(synth_dir / "orient.posmap")
    o[:, 3] = 0.0
    bad = tmp_path / "bad.posmap"
    write_maps(o, bad, dtype="f64")
    assert run(["decode", "--heatmaps", str(synth_dir / "heatmaps.posmap"), "--orient", str(bad),
                "--out", str(tmp_path / "p.ndjson")]) == 1


def test_custom_skeleton_flag(tmp_path, spec):
    sk = tmp_path / "sk.json"
    sk.write_text(json.dumps(spec.to_json()), encoding="utf-8")
    sc = write_scenario(tmp_path / "sc.json", n_frames=2)
    assert run(["--skeleton", str(sk), "synth", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 0


def test_bench_jitter_report_is_reproducible(tmp_path, capsys):
    sc = write_scenario(tmp_path / "sc.json", n_frames=6, noise_sigma=0.1, jitter_px=5.0, rescale_range=0.2)
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert run(["bench-jitter", "--scenario", str(sc), "--trials", "3", "--report", str(r1)]) == 0
    assert run(["bench-jitter", "--scenario", str(sc), "--trials", "3", "--report", str(r2)]) == 0
    assert r1.read_bytes() == r2.read_bytes()
    rep = json.loads(r1.read_text())
    assert len(rep["jittered"]["trial_pck"]) == 3 and "±" in rep["summary"]
    assert "jitter ±5px" in capsys.readouterr().out


def test_synth_is_byte_reproducible(tmp_path):
    sc = write_scenario(tmp_path / "sc.json", noise_sigma=0.1, heatmap_noise_sigma=0.05, map_dtype="f32")
    for d in ("a", "b"):
        assert run(["synth", "--scenario", str(sc), "--out", str(tmp_path / d)]) == 0
    for name in ("heatmaps.posmap", "orient.posmap", "poses.ndjson", "frames.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.slow
def test_selftest_subprocess():
    proc = subprocess.run([sys.executable, "-m", "posecodec", "selftest"], capture_output=True,
                          text=True, timeout=120)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 6
