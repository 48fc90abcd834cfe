"""Built-in invariant suite run by ``posecodec selftest``.

Each check returns (passed, detail). Checks use their own brute-force
oracles and never share code paths with the routine being checked beyond
the call under test.
"""

from __future__ import annotations

import math
import tempfile
import time
from pathlib import Path

import numpy as np

from .losses import heatmap_loss, orientation_loss
from .metrics import auc, mpjpe, pck, procrustes_align
from .skeleton import default_h36m_skeleton
from .synth import SynthScenario, axis_angle_matrix, decode_frame, generate, make_rng
from .tensorio import read_maps, write_maps
from .errors import CrcMismatch


def check_round_trip(n_frames: int = 1000, seed: int = 11):
    spec = default_h36m_skeleton()
    t0 = time.perf_counter()
    frames = generate(SynthScenario(seed=seed, n_frames=n_frames), spec)
    worst = max(mpjpe(decode_frame(f, spec, "gt").pose, f.gt_pose) for f in frames)
    dt = time.perf_counter() - t0
    return worst < 1e-6 and dt < 30.0, f"{n_frames} frames, worst MPJPE {worst:.2e} mm, {dt:.1f} s"


def check_scale_invariance(seed: int = 12):
    from .encode import render_orientation_maps
    from .skeleton import Pose3D

    spec = default_h36m_skeleton()
    f = generate(SynthScenario(seed=seed, n_frames=1), spec)[0]
    kp = f.gt_kp
    worst_o = worst_v = 0.0
    base_o = render_orientation_maps(f.gt_pose, kp, spec).data
    base_v = render_orientation_maps(f.gt_pose, kp, spec, mode="limb_vector").data
    for s in (0.5, 1.0, 2.5):
        p = Pose3D(s * f.gt_pose.joints_mm)
        o = render_orientation_maps(p, kp, spec).data
        v = render_orientation_maps(p, kp, spec, mode="limb_vector").data
        worst_o = max(worst_o, float(np.max(np.abs(o - base_o))))
        worst_v = max(worst_v, float(np.max(np.abs(v - s * base_v))))
    return worst_o < 1e-12 and worst_v < 1e-12, f"orientation {worst_o:.1e}, limb_vector {worst_v:.1e}"


def ld_orientation_loss(pred, gt):
    d = np.asarray(pred, dtype=np.longdouble) - np.asarray(gt, dtype=np.longdouble)
    return np.sum(d * d)


def ld_heatmap_loss(prob, gt):
    p = np.asarray(prob, dtype=np.longdouble)
    g = np.asarray(gt, dtype=np.longdouble)
    return -np.sum(g * np.log(p) + (1 - g) * np.log(1 - p)) / p.shape[0]


def fd_rel_error(fn, x, grad, h=1e-5):
    """Worst elementwise |fd - grad| / max(|fd|, |grad|) by central differences.

    ``fn`` is evaluated in extended precision: with a float64 loss near
    1e4 the rounding of each evaluation alone is ~1e-12, which after the
    division by 2h swamps small gradient entries.
    """
    x = np.array(x, dtype=np.longdouble)
    flat = x.reshape(-1)
    g = np.asarray(grad, dtype=np.longdouble).reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = fn(x)
        flat[i] = old - h
        down = fn(x)
        flat[i] = old
        fd = (up - down) / (2 * h)
        den = max(abs(fd), abs(g[i]))
        if den > 0:
            worst = max(worst, float(abs(fd - g[i]) / den))
    return worst


def check_gradients(n_stacks: int = 20, seed: int = 13, n_limbs: int = 16, n_joints: int = 17):
    rng = make_rng(seed)
    worst = worst_value = 0.0
    for _ in range(n_stacks):
        po, go = rng.normal(size=(n_limbs, 8, 8, 3)), rng.normal(size=(n_limbs, 8, 8, 3))
        lo, g = orientation_loss(po, go)
        ref = ld_orientation_loss(po, go)
        worst_value = max(worst_value, float(abs(lo - ref) / ref))
        worst = max(worst, fd_rel_error(lambda x: ld_orientation_loss(x, go), po, g))
        pp, gp = rng.uniform(0.05, 0.95, size=(n_joints, 8, 8)), rng.uniform(0, 1, size=(n_joints, 8, 8))
        lp, g = heatmap_loss(pp, gp)
        ref = ld_heatmap_loss(pp, gp)
        worst_value = max(worst_value, float(abs(lp - ref) / ref))
        worst = max(worst, fd_rel_error(lambda x: ld_heatmap_loss(x, gp), pp, g))
    ok = worst < 1e-4 and worst_value < 1e-12
    return ok, f"max relative error {worst:.1e}, loss values within {worst_value:.1e} of extended precision"


def check_procrustes(n_poses: int = 200, seed: int = 14):
    spec = default_h36m_skeleton()
    frames = generate(SynthScenario(seed=seed, n_frames=n_poses), spec)
    rng = make_rng(seed, 0, 9)
    worst, dets_ok = 0.0, True
    for i, f in enumerate(frames):
        gt = f.gt_pose.joints_mm
        s = rng.uniform(0.3, 3.0)
        angle = math.pi if i % 4 == 0 else rng.uniform(0, math.pi)  # half-turns are sign-ambiguous
        r = axis_angle_matrix(rng.normal(size=3), angle)
        t = rng.normal(scale=500.0, size=3)
        # pred is gt under the inverse transform; alignment must undo it
        pred = ((gt - t) @ r) / s
        tf, aligned = procrustes_align(pred, gt)
        worst = max(worst, float(np.max(np.linalg.norm(aligned.joints_mm - gt, axis=1))))
        dets_ok &= abs(np.linalg.det(tf.rotation) - 1) < 1e-9
    return worst < 1e-9 and dets_ok, f"max residual {worst:.1e} mm, det(R)=+1: {dets_ok}"


def check_metric_oracles(n: int = 10_000, seed: int = 15):
    rng = make_rng(seed)
    errs = rng.uniform(0, 200, size=n)
    count = 0
    for e in errs:
        if e <= 150.0:
            count += 1
    ok_pck = pck(errs) == count / n
    total = 0.0
    for t in range(5, 151, 5):
        c = 0
        for e in errs:
            if e <= t:
                c += 1
        total += c / n
    ok_auc = abs(auc(errs) - total / 30) <= 1e-15
    a, b = rng.normal(size=(17, 3)) * 300, rng.normal(size=(17, 3)) * 300
    ref = 0.0
    for j in range(17):
        ref += math.dist(a[j] - a[0], b[j] - b[0])
    ref /= 17
    ok_mpjpe = abs(mpjpe(a, b) - ref) <= 1e-12 * ref
    return ok_pck and ok_auc and ok_mpjpe, f"pck {ok_pck}, auc {ok_auc}, mpjpe {ok_mpjpe}"


def check_determinism_io(seed: int = 16):
    spec = default_h36m_skeleton()
    sc = SynthScenario(seed=seed, n_frames=4, noise_sigma=0.1)
    blobs = []
    with tempfile.TemporaryDirectory() as d:
        for run in range(2):
            frames = generate(sc, spec)
            p = Path(d) / f"o{run}.posmap"
            write_maps([f.orientation_maps for f in frames], p)
            blobs.append(p.read_bytes())
        same = blobs[0] == blobs[1]
        arr = np.asarray(make_rng(seed).normal(size=(3, 5, 7)), dtype="<f4")
        p = Path(d) / "rt.posmap"
        write_maps(arr, p)
        exact = read_maps(p).tobytes() == arr.tobytes()
        raw = bytearray(p.read_bytes())
        raw[40] ^= 0x01
        p.write_bytes(bytes(raw))
        try:
            read_maps(p)
            crc = False
        except CrcMismatch:
            crc = True
    return same and exact and crc, f"identical {same}, round-trip {exact}, crc detects {crc}"


CHECKS = [
    ("1 round-trip exactness", check_round_trip),
    ("2 scale invariance", check_scale_invariance),
    ("3 gradient correctness", check_gradients),
    ("4 procrustes recovery", check_procrustes),
    ("5 metric oracles", check_metric_oracles),
    ("8 determinism and I/O", check_determinism_io),
]


def run(out=None) -> bool:
    import sys

    out = out or sys.stdout
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as e:  # a crash is a failure, not an abort
            ok, detail = False, f"{type(e).__name__}: {e}"
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    return all_ok
