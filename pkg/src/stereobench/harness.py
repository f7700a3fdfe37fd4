"""Black-box protocol runner, degradation sweeps, and synthetic scenes.

The protocol takes a ground-truth stereo clip plus a candidate right-view
video produced by some conversion method (the harness never runs the method
itself) and reports four metric families:

* overall quality: PSNR / SSIM between ground-truth right and candidate
* stereoscopic fidelity: patch-wise PSNR and matchability error, both
  computed between the *left* view and the candidate
* geometric correctness: aligned disparity error against ground truth
* temporal stability: end-point error between the flows of the true and
  generated right videos

Methods may be handed global 3D information (a scale/shift pair for
warp-style methods, or the median-disparity scalar for direct ones); the
harness only transports it into the report's config echo.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from stereobench import disparity as disparity_mod
from stereobench import flow as flow_mod
from stereobench import matching
from stereobench import quality
from stereobench.imgproc import gaussian_blur, shift_horizontal
from stereobench.media_io import DisparityMap, EvaluationReport, StereoClip, VideoClip
from stereobench.warp import forward_warp


@dataclass(frozen=True)
class MatchConfig:
    """Parameters for the matchability backend (detector + matcher)."""

    max_keypoints: int = 512
    nms_radius: int = 4
    v_tol: int = 2
    ratio: float = 0.8
    d_max: int = 64
    hamming_max: int = 64


@dataclass
class ProtocolRun:
    input: StereoClip
    candidate: VideoClip
    gt_disparity: list | None = None
    global_3d_info: dict = field(default_factory=dict)
    ppsnr: quality.PatchPsnrConfig = field(default_factory=quality.PatchPsnrConfig)
    sgm: disparity_mod.SgmConfig = field(default_factory=disparity_mod.SgmConfig)
    flow: flow_mod.FlowConfig = field(default_factory=flow_mod.FlowConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    psnr_cap: float = quality.DEFAULT_PSNR_CAP

    def __post_init__(self):
        if self.candidate.frames.shape != self.input.left.frames.shape:
            raise ValueError(
                f"candidate shape {self.candidate.frames.shape} does not match "
                f"input {self.input.left.frames.shape}"
            )
        if self.gt_disparity is not None and len(self.gt_disparity) != len(self.input.left):
            raise ValueError("ground-truth disparity list length must match the clip")


@dataclass(frozen=True)
class DegradationSpec:
    """A degradation kind plus its sweep levels.

    kind "horizontal_shift": integer pixel shifts (content moves rightward);
    kind "gaussian_blur": positive sigmas. Level 0 is the identity for both.
    """

    kind: str
    levels: tuple

    def __post_init__(self):
        if self.kind not in ("horizontal_shift", "gaussian_blur"):
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        if not self.levels:
            raise ValueError("levels must be non-empty")
        if self.kind == "horizontal_shift":
            if any(int(l) != l for l in self.levels):
                raise ValueError("shift levels must be integers")
        else:
            if any(l < 0 for l in self.levels):
                raise ValueError("blur sigmas must be >= 0")


def _detect_and_match_gt(run: ProtocolRun):
    """Per-frame left keypoints and their ground-truth match sets."""
    mc = run.match
    kps_per_frame, m_gt_per_frame = [], []
    for t in range(len(run.input.left)):
        left = run.input.left.frames[t]
        kps = matching.detect_keypoints(left, max_count=mc.max_keypoints, nms_radius=mc.nms_radius)
        kps_per_frame.append(kps)
        m_gt_per_frame.append(
            matching.match_epipolar(
                kps, left, run.input.right.frames[t],
                v_tol=mc.v_tol, ratio=mc.ratio, d_max=mc.d_max, hamming_max=mc.hamming_max,
            )
        )
    return kps_per_frame, m_gt_per_frame


def _match_candidate(run: ProtocolRun, kps_per_frame, candidate_frames):
    mc = run.match
    return [
        matching.match_epipolar(
            kps_per_frame[t], run.input.left.frames[t], candidate_frames[t],
            v_tol=mc.v_tol, ratio=mc.ratio, d_max=mc.d_max, hamming_max=mc.hamming_max,
        )
        for t in range(len(kps_per_frame))
    ]


def _pooled_match_error(m_gt_list, m_pred_list):
    tp = fp = fn = 0
    per_frame_err, per_tp, per_fp, per_fn = [], [], [], []
    for m_gt, m_pred in zip(m_gt_list, m_pred_list):
        b = matching.matchability_error(m_gt, m_pred)
        per_frame_err.append(b.error)
        per_tp.append(b.n_tp)
        per_fp.append(b.n_fp)
        per_fn.append(b.n_fn)
        tp, fp, fn = tp + b.n_tp, fp + b.n_fp, fn + b.n_fn
    total = tp + fp + fn
    err = (fp + fn) / total if total else 0.0
    return err, {"tp": tp, "fp": fp, "fn": fn}, per_frame_err, per_tp, per_fp, per_fn


def _config_echo(run: ProtocolRun) -> dict:
    return {
        "global_3d_info": dict(run.global_3d_info),
        "ppsnr": asdict(run.ppsnr),
        "sgm": asdict(run.sgm),
        "flow": asdict(run.flow),
        "match": asdict(run.match),
        "psnr_cap": run.psnr_cap,
        "n_frames": len(run.input.left),
        "height": run.input.left.height,
        "width": run.input.left.width,
    }


def run_protocol(run: ProtocolRun) -> EvaluationReport:
    """Evaluate a candidate right-view video against the ground-truth pair.

    Failures of individual metrics are recorded in the report's errors map
    and leave that metric null; the rest of the report is still produced.
    """
    report = EvaluationReport(config=_config_echo(run))
    gt_right = run.input.right.frames
    left = run.input.left.frames
    cand = run.candidate.frames
    n = len(run.input.left)

    try:
        mses = [quality.mse(gt_right[t], cand[t]) for t in range(n)]
        report.per_frame["psnr_mse"] = mses
        report.per_frame["psnr"] = [quality._db_from_mse(m, run.psnr_cap) for m in mses]
        report.psnr = quality._db_from_mse(float(np.mean(mses)), run.psnr_cap)
    except Exception as exc:
        report.errors["psnr"] = str(exc)

    try:
        per_ssim = [quality.ssim(gt_right[t], cand[t]) for t in range(n)]
        report.per_frame["ssim"] = per_ssim
        report.ssim = float(np.mean(per_ssim))
    except Exception as exc:
        report.errors["ssim"] = str(exc)

    try:
        p_mses = [quality.patch_best_mse(left[t], cand[t], run.ppsnr) for t in range(n)]
        report.per_frame["p_psnr_mse"] = p_mses
        report.per_frame["p_psnr"] = [
            quality._db_from_mse(m, run.ppsnr.psnr_cap) for m in p_mses
        ]
        report.p_psnr = quality._db_from_mse(float(np.mean(p_mses)), run.ppsnr.psnr_cap)
    except Exception as exc:
        report.errors["p_psnr"] = str(exc)

    try:
        kps, m_gt = _detect_and_match_gt(run)
        m_pred = _match_candidate(run, kps, cand)
        err, counts, per_err, per_tp, per_fp, per_fn = _pooled_match_error(m_gt, m_pred)
        report.match_error = err
        report.match_counts = counts
        report.per_frame["match_error"] = per_err
        report.per_frame["match_tp"] = per_tp
        report.per_frame["match_fp"] = per_fp
        report.per_frame["match_fn"] = per_fn
    except Exception as exc:
        report.errors["match_error"] = str(exc)

    if run.gt_disparity is None:
        report.errors["disp_err"] = "ground-truth disparity not provided"
    else:
        try:
            pred_pair = StereoClip(left=run.input.left, right=run.candidate)
            res = disparity_mod.disparity_error(pred_pair, run.gt_disparity, run.sgm)
            report.disp_err = res.aggregate
            report.per_frame["disp_err"] = res.per_frame
            report.excluded_frames["disp_err"] = res.excluded
        except Exception as exc:
            report.errors["disp_err"] = str(exc)

    try:
        res = flow_mod.temporal_error(run.input.right, run.candidate, run.flow)
        report.temp_err = res.aggregate
        report.per_frame["temp_err"] = res.per_pair
        report.per_frame["temp_err_pixels"] = res.per_pair_pixels
    except Exception as exc:
        report.errors["temp_err"] = str(exc)

    return report


def degrade_frame(frame: np.ndarray, kind: str, level) -> np.ndarray:
    """Apply one degradation level; level 0 (or sigma 0) is the identity."""
    if kind == "horizontal_shift":
        return shift_horizontal(frame, int(level))
    if level == 0:
        return frame.copy()
    return gaussian_blur(frame, float(level))


def sensitivity_sweep(run: ProtocolRun, spec: DegradationSpec) -> list:
    """Recompute PSNR, P-PSNR, SSIM and matchability per degradation level.

    Horizontal shifts move the candidate content rightward and drop the
    wrapped-in columns: pixel metrics compare on the region where the
    shifted frame is defined (the same crop applied to both images, rounded
    up to the patch stride so the patch grid stays aligned with the scene
    across levels), while matchability keeps full-frame coordinates (left
    keypoints losing their counterpart simply drop out of the match set).
    Returns rows of {"level", "metric", "value"} dicts, four per level.
    """
    width = run.input.left.width
    if spec.kind == "horizontal_shift" and max(abs(int(l)) for l in spec.levels) >= width:
        raise ValueError(f"shift level exceeds frame width {width}")
    stride = run.ppsnr.stride

    n = len(run.input.left)
    gt_right = run.input.right.frames
    left = run.input.left.frames
    kps, m_gt = _detect_and_match_gt(run)

    rows = []
    for level in spec.levels:
        degraded = np.stack(
            [degrade_frame(run.candidate.frames[t], spec.kind, level) for t in range(n)]
        )
        if spec.kind == "horizontal_shift":
            k = int(level)
            ka = -(-abs(k) // stride) * stride
            sl = slice(ka, width) if k >= 0 else slice(0, width - ka)
        else:
            sl = slice(0, width)

        mses = [quality.mse(gt_right[t][:, sl], degraded[t][:, sl]) for t in range(n)]
        psnr_v = quality._db_from_mse(float(np.mean(mses)), run.psnr_cap)
        ssim_v = float(np.mean([quality.ssim(gt_right[t][:, sl], degraded[t][:, sl]) for t in range(n)]))
        p_mses = [
            quality.patch_best_mse(left[t][:, sl], degraded[t][:, sl], run.ppsnr) for t in range(n)
        ]
        ppsnr_v = quality._db_from_mse(float(np.mean(p_mses)), run.ppsnr.psnr_cap)
        m_pred = _match_candidate(run, kps, degraded)
        match_v = _pooled_match_error(m_gt, m_pred)[0]

        rows.extend(
            {"level": level, "metric": name, "value": value}
            for name, value in (
                ("psnr", psnr_v),
                ("ssim", ssim_v),
                ("p_psnr", ppsnr_v),
                ("match_error", match_v),
            )
        )
    return rows


def write_curves(rows: list, path) -> None:
    """Write sweep rows as CSV with a level,metric,value header."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "metric", "value"])
        for row in rows:
            writer.writerow([row["level"], row["metric"], repr(row["value"])])


@dataclass(frozen=True)
class DisparityProfile:
    """Piecewise-planar disparity layout for synthetic scenes.

    kind "constant": one integer disparity everywhere. kind "two_plane": an
    integer background disparity plus a centered foreground square (side
    min(H, W) // 4) at a second integer disparity.
    """

    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in ("constant", "two_plane"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        expected = 1 if self.kind == "constant" else 2
        if len(self.values) != expected:
            raise ValueError(f"profile {self.kind} needs {expected} value(s), got {self.values}")
        if any(int(v) != v for v in self.values):
            raise ValueError("profile disparities must be integers for exact synthesis")

    @classmethod
    def parse(cls, text: str) -> "DisparityProfile":
        kind, _, arg = text.partition(":")
        values = tuple(float(tok) for tok in arg.split(",") if tok)
        return cls(kind=kind, values=values)

    @property
    def max_abs(self) -> int:
        return int(max(abs(v) for v in self.values))


def _textured_canvas(rng: np.random.Generator, height: int, width: int, kind: str = "dense") -> np.ndarray:
    """Synthetic scene texture.

    "dense": random dots everywhere plus a coarse component, the strongest
    setting for block-matching oracles (every window is unambiguous) while
    keeping the long-range autocorrelation that shift sweeps rely on.

    "sparse": smooth multi-scale shading with scattered high-contrast dots,
    closer to natural footage: plenty of corner features for the matcher,
    but most windows are low-variance so window-based similarity degrades
    gently under blur.
    """
    if kind == "dense":
        canvas = np.empty((height, width, 3))
        for c in range(3):
            fine = gaussian_blur(rng.standard_normal((height, width)), 0.8)
            coarse = gaussian_blur(rng.standard_normal((height, width)), 8.0)
            layer = 0.5 + 0.22 * fine / fine.std() + 0.18 * coarse / coarse.std()
            canvas[..., c] = np.clip(layer, 0.0, 1.0)
        return canvas
    if kind != "sparse":
        raise ValueError(f"unknown texture kind {kind!r} (expected 'dense' or 'sparse')")
    shading = np.empty((height, width))
    coarse = gaussian_blur(rng.standard_normal((height, width)), 8.0)
    mid = gaussian_blur(rng.standard_normal((height, width)), 3.0)
    shading = 0.5 + 0.18 * coarse / coarse.std() + 0.05 * mid / mid.std()
    n_dots = max(1, height * width // 200)
    ys = rng.integers(0, height - 1, size=n_dots)
    xs = rng.integers(0, width - 1, size=n_dots)
    polarity = rng.choice([-0.35, 0.35], size=n_dots)
    dots = np.zeros((height, width))
    for y, x, p in zip(ys, xs, polarity):
        dots[y : y + 2, x : x + 2] = p
    layer = np.clip(shading + dots, 0.0, 1.0)
    return np.repeat(layer[:, :, None], 3, axis=2)


def make_synthetic_scene(
    seed: int,
    width: int,
    height: int,
    n_frames: int,
    profile: DisparityProfile,
    motion_px: int = 1,
    fps: float = 12.0,
    texture: str = "dense",
):
    """Textured stereo scene with known disparity and global camera pan.

    The left video is a moving crop of a wide textured canvas (pure
    horizontal translation of motion_px per frame). Each right frame is the
    forward warp of its left frame under the ground-truth disparity, with
    disocclusion holes filled by the background plane's texture so the pair
    is complete. Returns (StereoClip, per-frame DisparityMap list with full
    validity).
    """
    if n_frames < 1:
        raise ValueError("need at least one frame")
    rng = np.random.default_rng(seed)
    pad = abs(motion_px) * n_frames + profile.max_abs + 16
    canvas = _textured_canvas(rng, height, width + 2 * pad, texture)

    if profile.kind == "constant":
        d_bg = int(profile.values[0])
        square = None
    else:
        d_bg, d_fg = (int(v) for v in profile.values)
        side = min(height, width) // 4
        r0 = (height - side) // 2
        # scene-anchored square, kept inside every frame's crop window
        c0_scene = pad + (width - side) // 2 + (n_frames * motion_px) // 2
        square = (r0, r0 + side, c0_scene, c0_scene + side, d_fg)

    left_frames, right_frames, disp_maps = [], [], []
    for t in range(n_frames):
        off = pad + t * motion_px
        left = canvas[:, off : off + width].copy()
        values = np.full((height, width), float(d_bg))
        if square is not None:
            r0, r1, c0s, c1s, d_fg = square
            c0 = max(c0s - off, 0)
            c1 = min(c1s - off, width)
            if c1 > c0:
                values[r0:r1, c0:c1] = float(d_fg)
        dmap = DisparityMap(values=values, valid=np.ones((height, width), dtype=bool))

        warped = forward_warp(left, dmap, 1.0)
        background = canvas[:, off + d_bg : off + d_bg + width]
        right = np.where(warped.valid[..., None], warped.image, background)

        left_frames.append(left)
        right_frames.append(right)
        disp_maps.append(dmap)

    clip = StereoClip(
        left=VideoClip(frames=np.stack(left_frames), fps=fps),
        right=VideoClip(frames=np.stack(right_frames), fps=fps),
    )
    return clip, disp_maps
