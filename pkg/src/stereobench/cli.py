"""Command-line front end.

Subcommands:

* convert      forward-warp a left clip by a scaled disparity sequence
* augment      emit warped views for a whole scale set plus conditioning scalars
* anaglyph     compose red/cyan anaglyphs from a stereo pair
* metric       one metric between two clips (psnr | ssim | ppsnr | match | temporal)
* disparity    estimate disparity maps for a rectified pair (PFM output)
* evaluate     run the full protocol and write a JSON report
* sensitivity  degradation sweep (shift | blur), CSV output
* synth        generate a synthetic random-dot stereo scene
* attn-bench   time the row-constrained attention and print its memory model
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from stereobench import attention, disparity, flow, harness, matching, quality, warp
from stereobench.media_io import (
    load_clip,
    load_disparity,
    save_clip,
    save_disparity,
    save_frame,
    save_report,
    VideoClip,
    StereoClip,
)

DEFAULT_SCALES_ARG = ",".join(str(s) for s in warp.DEFAULT_SCALE_FACTORS)


def _load_disparity_dir(path: str) -> list:
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"disparity directory not found: {directory}")
    files = sorted(
        (p for p in directory.iterdir() if p.suffix.lower() == ".pfm"),
        key=lambda p: int(p.stem) if p.stem.isdigit() else p.stem,
    )
    if not files:
        raise FileNotFoundError(f"no PFM files in {directory}")
    return [load_disparity(p) for p in files]


def _save_mask_clip(masks: list, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    for i, mask in enumerate(masks):
        frame = np.repeat(mask[:, :, None].astype(np.float64), 3, axis=2)
        save_frame(frame, path / f"{i:03d}.png")


def _cmd_convert(args) -> int:
    clip = load_clip(args.left)
    disps = _load_disparity_dir(args.disparity)
    if len(disps) == 1 and len(clip) > 1:
        disps = disps * len(clip)
    if len(disps) != len(clip):
        raise ValueError(f"{len(clip)} frames but {len(disps)} disparity maps")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    masks = []
    warped_frames = []
    for t in range(len(clip)):
        res = warp.forward_warp(clip.frames[t], disps[t], args.scale)
        warped_frames.append(res.image)
        masks.append(res.valid)
    save_clip(VideoClip(frames=np.stack(warped_frames), fps=clip.fps), out)
    if args.mask_out:
        _save_mask_clip(masks, Path(args.mask_out))
    delta = warp.median_disparity(disps[0])
    print(f"warped {len(clip)} frames at scale {args.scale}; conditioning {args.scale * delta:g}")
    return 0


def _cmd_augment(args) -> int:
    clip = load_clip(args.left)
    disps = _load_disparity_dir(args.disparity)
    if len(disps) == 1 and len(clip) > 1:
        disps = disps * len(clip)
    if len(disps) != len(clip):
        raise ValueError(f"{len(clip)} frames but {len(disps)} disparity maps")
    scales = warp.ScaleSet(tuple(float(s) for s in args.scales.split(",")))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    delta = warp.median_disparity(disps[0])
    conditioning = {}
    for s in scales.factors:
        sub = out / f"scale_{s:g}"
        frames = [warp.forward_warp(clip.frames[t], disps[t], s).image for t in range(len(clip))]
        save_clip(VideoClip(frames=np.stack(frames), fps=clip.fps), sub)
        conditioning[f"{s:g}"] = s * delta
    with open(out / "conditioning.json", "w", encoding="utf-8") as fh:
        json.dump({"median_disparity": delta, "scaled": conditioning}, fh, indent=2, sort_keys=True)
    print(f"augmented {len(scales.factors)} scales; base conditioning {delta:g}")
    return 0


def _cmd_anaglyph(args) -> int:
    left = load_clip(args.left)
    right = load_clip(args.right)
    if len(left) != len(right):
        raise ValueError(f"clip length mismatch: {len(left)} vs {len(right)}")
    frames = [warp.anaglyph(left.frames[t], right.frames[t]) for t in range(len(left))]
    save_clip(VideoClip(frames=np.stack(frames), fps=left.fps), Path(args.out))
    print(f"wrote {len(left)} anaglyph frames to {args.out}")
    return 0


def _ppsnr_config(args) -> quality.PatchPsnrConfig:
    return quality.PatchPsnrConfig(patch=args.patch, stride=args.stride, search_range=args.range)


def _dump_flows(a, b, out: Path) -> None:
    """Write per-pair flow fields of both clips as du/dv PFM pairs."""
    from stereobench.media_io import DisparityMap

    out.mkdir(parents=True, exist_ok=True)
    for label, clip in (("a", a), ("b", b)):
        for t in range(len(clip) - 1):
            field = flow.optical_flow(clip.frames[t], clip.frames[t + 1])
            keep = ~field.border
            for comp, name in ((0, "du"), (1, "dv")):
                save_disparity(
                    DisparityMap(values=field.vectors[..., comp], valid=keep),
                    out / f"{label}_{t:03d}_{name}.pfm",
                )


def _cmd_metric(args) -> int:
    a = load_clip(args.a)
    b = load_clip(args.b)
    if args.metric in ("psnr", "ssim", "ppsnr"):
        cfg = _ppsnr_config(args)
        per_frame, aggregate = quality.clip_metric(args.metric, a, b, cfg=cfg)
        for t, v in enumerate(per_frame):
            print(f"frame {t:03d}: {v:.6f}")
        print(f"{args.metric}: {aggregate:.6f}")
        return 0
    if args.metric == "temporal":
        res = flow.temporal_error(a, b)
        for t, v in enumerate(res.per_pair):
            print(f"pair {t:03d}: {v:.6f}")
        print(f"temporal: {res.aggregate:.6f}")
        if args.dump_flow:
            _dump_flows(a, b, Path(args.dump_flow))
        return 0
    if args.metric == "match":
        if not args.gt:
            print("metric match requires --gt (ground-truth right clip)", file=sys.stderr)
            return 2
        gt = load_clip(args.gt)
        tp = fp = fn = 0
        dump_rows = []
        for t in range(len(a)):
            kps = matching.detect_keypoints(a.frames[t])
            m_gt = matching.match_epipolar(kps, a.frames[t], gt.frames[t])
            m_pred = matching.match_epipolar(kps, a.frames[t], b.frames[t])
            br = matching.matchability_error(m_gt, m_pred)
            tp, fp, fn = tp + br.n_tp, fp + br.n_fp, fn + br.n_fn
            if args.dump_matches:
                dump_rows.extend((t, u, v, s) for u, v, s in matching.match_status_rows(m_gt, m_pred))
        total = tp + fp + fn
        err = (fp + fn) / total if total else 0.0
        print(f"match_error: {err:.6f} (tp={tp} fp={fp} fn={fn})")
        if args.dump_matches:
            with open(args.dump_matches, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["frame", "u", "v", "status"])
                writer.writerows(dump_rows)
        return 0
    raise ValueError(f"unknown metric {args.metric}")


def _sgm_config(args) -> disparity.SgmConfig:
    return disparity.SgmConfig(
        block=args.sgm_block, d_min=args.dmin, d_max=args.dmax, p1=args.p1, p2=args.p2
    )


def _cmd_disparity(args) -> int:
    left = load_clip(args.left)
    right = load_clip(args.right)
    if len(left) != len(right):
        raise ValueError(f"clip length mismatch: {len(left)} vs {len(right)}")
    cfg = _sgm_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t in range(len(left)):
        dmap = disparity.estimate_disparity(left.frames[t], right.frames[t], cfg)
        save_disparity(dmap, out / f"{t:03d}.pfm")
    print(f"wrote {len(left)} disparity maps to {out}")
    return 0


def _protocol_run(args) -> harness.ProtocolRun:
    left = load_clip(args.left)
    right_gt = load_clip(args.right_gt)
    candidate = load_clip(args.right_pred)
    gt_disp = _load_disparity_dir(args.gt_disp) if args.gt_disp else None
    info = {}
    if args.delta is not None:
        info["median_disparity"] = args.delta
    if args.scale_shift:
        s, sh = (float(x) for x in args.scale_shift.split(","))
        info["scale"] = s
        info["shift"] = sh
    return harness.ProtocolRun(
        input=StereoClip(left=left, right=right_gt),
        candidate=candidate,
        gt_disparity=gt_disp,
        global_3d_info=info,
        ppsnr=quality.PatchPsnrConfig(
            patch=args.ppsnr_patch, stride=args.ppsnr_stride, search_range=args.ppsnr_range
        ),
        sgm=disparity.SgmConfig(
            block=args.sgm_block, d_min=args.sgm_dmin, d_max=args.sgm_dmax,
            p1=args.sgm_p1, p2=args.sgm_p2,
        ),
        flow=flow.FlowConfig(
            levels=args.flow_levels, block=args.flow_block, radius=args.flow_radius
        ),
        match=harness.MatchConfig(max_keypoints=args.match_max_kp, d_max=args.match_dmax),
    )


def _cmd_evaluate(args) -> int:
    run = _protocol_run(args)
    report = harness.run_protocol(run)
    save_report(report, args.out)
    for name in ("psnr", "ssim", "p_psnr", "match_error", "disp_err", "temp_err"):
        value = getattr(report, name)
        print(f"{name}: {'null' if value is None else f'{value:.6f}'}")
    failed = sorted(report.errors)
    if failed:
        for name in failed:
            print(f"metric {name} failed: {report.errors[name]}", file=sys.stderr)
        return 1
    return 0


def _cmd_sensitivity(args) -> int:
    run = _protocol_run(args)
    kind = "horizontal_shift" if args.kind == "shift" else "gaussian_blur"
    parse = int if args.kind == "shift" else float
    levels = tuple(parse(tok) for tok in args.levels.split(","))
    spec = harness.DegradationSpec(kind=kind, levels=levels)
    rows = harness.sensitivity_sweep(run, spec)
    harness.write_curves(rows, args.out)
    print(f"wrote {len(rows)} curve rows to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    profile = harness.DisparityProfile.parse(args.profile)
    clip, disps = harness.make_synthetic_scene(
        seed=args.seed, width=args.width, height=args.height,
        n_frames=args.frames, profile=profile, motion_px=args.motion,
        texture=args.texture,
    )
    out = Path(args.out)
    save_clip(clip.left, out / "left")
    save_clip(clip.right, out / "right")
    disp_dir = out / "disp"
    disp_dir.mkdir(parents=True, exist_ok=True)
    for t, d in enumerate(disps):
        save_disparity(d, disp_dir / f"{t:03d}.pfm")
    with open(out / "scene.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "seed": args.seed, "width": args.width, "height": args.height,
                "frames": args.frames, "profile": args.profile, "motion_px": args.motion,
                "texture": args.texture,
            },
            fh, indent=2, sort_keys=True,
        )
    print(f"synthesized {args.frames} frames ({args.width}x{args.height}) into {out}")
    return 0


def _cmd_attn_bench(args) -> int:
    for mode in ("epipolar", "full"):
        nbytes = attention.attention_memory_model(args.h, args.w, args.bytes, mode)
        print(f"memory[{mode}]: {nbytes} bytes ({nbytes / 2**20:.1f} MiB)")
    rng = np.random.default_rng(args.seed)
    h = rng.standard_normal((args.h, args.w, args.c))
    g = rng.standard_normal((args.h, args.w, args.c))
    if args.weights:
        weights = attention.load_attention_weights(args.weights)
        if weights.channels != args.c or weights.d != args.d:
            raise ValueError(
                f"weights file is C={weights.channels}, d={weights.d}; "
                f"flags say C={args.c}, d={args.d}"
            )
    else:
        weights = attention.AttentionWeights.random(args.c, args.d, seed=args.seed)
    if args.mode == "oracle":
        dense_bytes = (args.h * args.w) ** 2 * 8
        if dense_bytes > 2**31:
            print(
                f"oracle mode would allocate {dense_bytes} bytes; refuse above 2 GiB",
                file=sys.stderr,
            )
            return 1
        fn = attention.full_cross_attention_row_masked
    else:
        fn = attention.epipolar_attention
    start = time.perf_counter()
    out = fn(h, g, weights)
    elapsed = time.perf_counter() - start
    print(f"{args.mode}: {args.h}x{args.w}x{args.c} d={args.d} in {elapsed:.3f}s "
          f"(output checksum {float(np.abs(out).sum()):.6e})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stereobench", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="forward-warp a left clip by scaled disparity")
    p.add_argument("--left", required=True)
    p.add_argument("--disparity", required=True, help="directory of per-frame PFM files")
    p.add_argument("--scale", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", default=None)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("augment", help="warp a clip across a whole scale set")
    p.add_argument("--left", required=True)
    p.add_argument("--disparity", required=True)
    p.add_argument("--scales", default=DEFAULT_SCALES_ARG)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("anaglyph", help="red/cyan anaglyph of a stereo pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_anaglyph)

    p = sub.add_parser("metric", help="single metric between two clips")
    p.add_argument("--metric", required=True, choices=["psnr", "ssim", "ppsnr", "match", "temporal"])
    p.add_argument("--a", required=True, help="reference clip (left view for ppsnr/match)")
    p.add_argument("--b", required=True, help="candidate clip")
    p.add_argument("--gt", default=None, help="ground-truth right clip (match only)")
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--range", type=int, default=32)
    p.add_argument("--dump-matches", default=None)
    p.add_argument("--dump-flow", default=None, help="directory for per-pair du/dv PFMs (temporal only)")
    p.set_defaults(func=_cmd_metric)

    p = sub.add_parser("disparity", help="semi-global disparity maps (PFM)")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dmin", type=int, default=-16)
    p.add_argument("--dmax", type=int, default=96)
    p.add_argument("--p1", type=float, default=8.0)
    p.add_argument("--p2", type=float, default=96.0)
    p.add_argument("--sgm-block", type=int, default=7)
    p.set_defaults(func=_cmd_disparity)

    def add_protocol_args(p):
        p.add_argument("--left", required=True)
        p.add_argument("--right-gt", required=True)
        p.add_argument("--right-pred", required=True)
        p.add_argument("--gt-disp", default=None)
        p.add_argument("--delta", type=float, default=None,
                       help="median-disparity scalar handed to direct methods (echoed)")
        p.add_argument("--scale-shift", default=None,
                       help="scale,shift pair handed to warp methods (echoed)")
        p.add_argument("--ppsnr-patch", type=int, default=16)
        p.add_argument("--ppsnr-stride", type=int, default=16)
        p.add_argument("--ppsnr-range", type=int, default=32)
        p.add_argument("--sgm-block", type=int, default=7)
        p.add_argument("--sgm-dmin", type=int, default=-16)
        p.add_argument("--sgm-dmax", type=int, default=96)
        p.add_argument("--sgm-p1", type=float, default=8.0)
        p.add_argument("--sgm-p2", type=float, default=96.0)
        p.add_argument("--flow-levels", type=int, default=3)
        p.add_argument("--flow-block", type=int, default=9)
        p.add_argument("--flow-radius", type=int, default=4)
        p.add_argument("--match-max-kp", type=int, default=512)
        p.add_argument("--match-dmax", type=int, default=64)

    p = sub.add_parser("evaluate", help="full protocol, JSON report")
    add_protocol_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sensitivity", help="degradation sweep, CSV curves")
    add_protocol_args(p)
    p.add_argument("--kind", required=True, choices=["shift", "blur"])
    p.add_argument("--levels", required=True, help="comma-separated levels, e.g. 1,2,4,8,13,16")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("synth", help="synthetic random-dot stereo scene")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--profile", default="two_plane:0,8")
    p.add_argument("--motion", type=int, default=1)
    p.add_argument("--texture", choices=["dense", "sparse"], default="dense")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("attn-bench", help="attention timing and memory model")
    p.add_argument("--h", type=int, default=512)
    p.add_argument("--w", type=int, default=512)
    p.add_argument("--c", type=int, default=16)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--bytes", type=int, default=2, help="bytes per attention element")
    p.add_argument("--mode", choices=["epipolar", "oracle"], default="epipolar")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", default=None, help="flat binary weights file")
    p.set_defaults(func=_cmd_attn_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
