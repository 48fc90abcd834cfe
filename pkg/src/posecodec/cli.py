"""Command-line entry point.

Exit codes: 0 success, 1 validation/invariant failure, 2 I/O or format
error, 3 bad flags. Failures print a single diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import selftest, tensorio
from .decode import decode_pose
from .encode import DEFAULT_MAP_SIZE, DEFAULT_SIGMA_PX, MODES, render_heatmaps, render_orientation_maps
from .errors import FormatError, JointCountMismatch, PoseCodecError
from .losses import DEFAULT_LAMBDA
from .metrics import AUC_THRESHOLDS_MM, PCK_THRESHOLD_MM, evaluate
from .skeleton import load_skeleton, pose_to_limb_vectors
from .synth import STREAM_JITTER, SynthScenario, generate, jitter_protocol, make_rng

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_FLAGS = 0, 1, 2, 3


class BadFlags(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise BadFlags(message)


def _map_size(s: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in s.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {s!r}")
    if h <= 0 or w <= 0:
        raise argparse.ArgumentTypeError("map size must be positive")
    return h, w


def defaults_header(**extra) -> dict:
    d = {
        "sigma_px": DEFAULT_SIGMA_PX,
        "map_size": list(DEFAULT_MAP_SIZE),
        "lambda": DEFAULT_LAMBDA,
        "pck_threshold_mm": PCK_THRESHOLD_MM,
        "auc_thresholds_mm": list(AUC_THRESHOLDS_MM),
    }
    d.update(extra)
    return d


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="posecodec", description=__doc__.splitlines()[0])
    p.add_argument("--skeleton", type=Path, help="skeleton JSON (default: built-in 17-joint)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("encode", help="render target heatmaps and orientation maps")
    e.add_argument("--poses", required=True, type=Path)
    e.add_argument("--keypoints", required=True, type=Path)
    e.add_argument("--out", required=True, type=Path)
    e.add_argument("--mode", choices=MODES, default="orientation")
    e.add_argument("--sigma", type=float, default=DEFAULT_SIGMA_PX)
    e.add_argument("--map-size", type=_map_size, default=DEFAULT_MAP_SIZE)
    e.add_argument("--dtype", choices=("f32", "f64"), default="f32")

    d = sub.add_parser("decode", help="decode maps into 3D poses")
    d.add_argument("--heatmaps", required=True, type=Path)
    d.add_argument("--orient", required=True, type=Path)
    d.add_argument("--lengths", default="ref", help="'ref' or 'gt:<posefile>'")
    d.add_argument("--root", default="origin", help="'origin' or 'gt:<posefile>'")
    d.add_argument("--out", required=True, type=Path)

    v = sub.add_parser("eval", help="score predicted poses against ground truth")
    v.add_argument("--pred", required=True, type=Path)
    v.add_argument("--gt", required=True, type=Path)
    v.add_argument("--report", required=True, type=Path)

    s = sub.add_parser("synth", help="generate a synthetic dataset from a scenario file")
    s.add_argument("--scenario", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)

    b = sub.add_parser("bench-jitter", help="decode-window jitter/rescale robustness")
    b.add_argument("--scenario", required=True, type=Path)
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--report", required=True, type=Path)
    b.add_argument("--lengths", choices=("gt", "ref"), default="gt")

    sub.add_parser("selftest", help="run the built-in invariant suite")
    return p


def _load_scenario(path) -> SynthScenario:
    with open(path, encoding="utf-8") as f:
        try:
            return SynthScenario.from_json(json.load(f))
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: {e}") from e


def _gt_source(arg: str, spec, n_frames: int):
    """Resolve a 'gt:<posefile>' argument into per-frame ground-truth poses."""
    if not arg.startswith("gt:"):
        raise BadFlags(f"expected 'gt:<posefile>', got {arg!r}")
    _, poses = tensorio.read_poses(arg[3:], spec.n_joints)
    if len(poses) != n_frames:
        raise JointCountMismatch(f"{arg[3:]} has {len(poses)} frames, maps have {n_frames}")
    return poses


def cmd_encode(args, spec) -> int:
    frames, poses = tensorio.read_poses(args.poses, spec.n_joints)
    kframes, kps = tensorio.read_keypoints(args.keypoints, spec.n_joints)
    if frames != kframes:
        raise FormatError("pose and keypoint files cover different frames")
    heat = [render_heatmaps(kp, args.sigma, args.map_size) for kp in kps]
    omaps = [render_orientation_maps(p, kp, spec, args.map_size, args.mode) for p, kp in zip(poses, kps)]
    args.out.mkdir(parents=True, exist_ok=True)
    tensorio.write_maps(heat, args.out / "heatmaps.posmap", args.dtype)
    tensorio.write_maps(omaps, args.out / "orient.posmap", args.dtype)
    flags = [{"frame": i, "limb": k, "flag": fl} for i, o in zip(frames, omaps) for k, fl in o.flags]
    _dump_json({"config": defaults_header(sigma_px=args.sigma, map_size=list(args.map_size),
                                          mode=args.mode, dtype=args.dtype),
                "frames": frames, "flags": flags}, args.out / "encode.json")
    return EXIT_OK


def cmd_decode(args, spec) -> int:
    heat = tensorio.load_heatmaps(args.heatmaps)
    omaps = tensorio.load_orientation_maps(args.orient)
    if len(heat) != len(omaps):
        raise FormatError(f"{len(heat)} heatmap frames vs {len(omaps)} orientation frames")
    if args.lengths == "ref":
        lengths = [spec.ref_lengths] * len(heat)
    else:
        lengths = [pose_to_limb_vectors(p, spec).lengths_mm for p in _gt_source(args.lengths, spec, len(heat))]
    if args.root == "origin":
        roots = [np.zeros(3)] * len(heat)
    else:
        roots = [p.joints_mm[spec.root_index] for p in _gt_source(args.root, spec, len(heat))]
    poses = []
    for i, (h, o) in enumerate(zip(heat, omaps)):
        res = decode_pose(h, o, spec, lengths[i], roots[i])
        for kind, idx, flag in res.warnings:
            print(f"warning: frame {i} {kind} {idx}: {flag}", file=sys.stderr)
        poses.append(res.pose)
    tensorio.write_poses(poses, args.out)
    return EXIT_OK


def format_table(report: dict) -> str:
    rows = [("MPJPE (mm)", f"{report['mpjpe_mm']:.4f}"),
            ("PA-MPJPE (mm)", f"{report['pa_mpjpe_mm']:.4f}"),
            (f"PCK@{report['config']['pck_threshold_mm']:g}mm", f"{report['pck']:.4f}"),
            ("AUC", f"{report['auc']:.4f}"),
            ("frames", str(report["n_frames"]))]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:>12}" for k, v in rows)


def cmd_eval(args, spec) -> int:
    _, pred = tensorio.read_poses(args.pred, spec.n_joints)
    _, gt = tensorio.read_poses(args.gt, spec.n_joints)
    rep = evaluate(pred, gt, spec.root_index)
    out = {"config": defaults_header(), **rep.to_json(), "joint_names": list(spec.joint_names)}
    _dump_json(out, args.report)
    print(format_table(out))
    return EXIT_OK


def cmd_synth(args, spec) -> int:
    sc = _load_scenario(args.scenario)
    frames = generate(sc, spec)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    tensorio.write_poses([f.gt_pose for f in frames], out / "poses.ndjson")
    tensorio.write_keypoints([f.gt_kp for f in frames], out / "keypoints.ndjson")
    tensorio.write_maps([f.heatmaps for f in frames], out / "heatmaps.posmap", sc.map_dtype)
    tensorio.write_maps([f.orientation_maps for f in frames], out / "orient.posmap", sc.map_dtype)
    meta = {
        "config": defaults_header(sigma_px=sc.sigma_px, map_size=list(sc.map_size)),
        "scenario": sc.to_json(),
        "frames": [{"frame": f.index, "bbox": list(f.bbox),
                    "flags": [[k, fl] for k, fl in f.orientation_maps.flags]} for f in frames],
    }
    _dump_json(meta, out / "frames.json")
    return EXIT_OK


def cmd_bench_jitter(args, spec) -> int:
    if args.trials < 1:
        raise BadFlags("--trials must be at least 1")
    sc = _load_scenario(args.scenario)
    frames = generate(sc, spec)
    rep = jitter_protocol(frames, spec, sc.camera, sc.jitter_px, sc.rescale_range, args.trials,
                          make_rng(sc.seed, 0, STREAM_JITTER), args.lengths)
    out = {"config": defaults_header(sigma_px=sc.sigma_px, map_size=list(sc.map_size)),
           "scenario": sc.to_json(), **rep.to_json(), "summary": rep.summary()}
    _dump_json(out, args.report)
    print(f"baseline PCK {100 * rep.baseline_pck:.1f} AUC {100 * rep.baseline_auc:.1f}")
    print(f"jitter ±{sc.jitter_px:g}px rescale ±{sc.rescale_range:g}: {rep.summary()}")
    return EXIT_OK


COMMANDS = {
    "encode": cmd_encode, "decode": cmd_decode, "eval": cmd_eval, "synth": cmd_synth,
    "bench-jitter": cmd_bench_jitter,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "selftest":
            return EXIT_OK if selftest.run() else EXIT_INVALID
        spec = load_skeleton(args.skeleton)
        return COMMANDS[args.command](args, spec)
    except BadFlags as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FLAGS
    except (FormatError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_IO
    except (PoseCodecError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
