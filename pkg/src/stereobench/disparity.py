"""Dense disparity estimation (block SAD + semi-global aggregation) and the
least-squares-aligned disparity error.

The estimator works on grayscale at an 8-bit cost scale: the per-pixel cost
is the block mean of |dI| * 255, so the classic smoothness penalties (p1=8,
p2=96) keep their usual magnitudes. Disparities are integer; sub-pixel
refinement is deliberately out of scope so results are exactly reproducible
against brute-force oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stereobench.imgproc import box_mean, to_gray
from stereobench.media_io import DisparityMap, StereoClip

_COST_BIG = np.float32(255.0)
_INF = np.float32(np.inf)


class DegenerateAlignmentError(ValueError):
    """Raised when the least-squares gain is undefined (constant or tiny overlap)."""


@dataclass(frozen=True)
class SgmConfig:
    """Semi-global matching parameters.

    block: odd SAD window side; d_min/d_max: inclusive disparity search
    bounds; p1/p2: small/large-jump smoothness penalties at the 8-bit cost
    scale; paths: number of aggregation directions (4 = left, right, up,
    down); lr_tol: left-right consistency tolerance in pixels; uniq_margin:
    minimum raw-cost gap between the cheapest disparity and the best one not
    adjacent to it, below which the pixel is invalidated (rejects arbitrary
    winners on textureless input, where every offset ties).
    """

    block: int = 7
    d_min: int = -16
    d_max: int = 96
    p1: float = 8.0
    p2: float = 96.0
    paths: int = 4
    lr_tol: int = 1
    uniq_margin: float = 4.0

    def __post_init__(self):
        if self.block % 2 != 1 or self.block < 1:
            raise ValueError(f"block must be odd and positive, got {self.block}")
        if self.d_min >= self.d_max:
            raise ValueError(f"d_min must be < d_max, got [{self.d_min}, {self.d_max}]")
        if self.p1 > self.p2:
            raise ValueError(f"p1 must be <= p2, got p1={self.p1}, p2={self.p2}")
        if self.paths not in (2, 4):
            raise ValueError(f"paths must be 2 or 4, got {self.paths}")
        if self.lr_tol < 0:
            raise ValueError("lr_tol must be >= 0")


@dataclass(frozen=True)
class AlignmentResult:
    """Least-squares gain/offset between predicted and true disparities."""

    a: float
    b: float
    mae: float


@dataclass(frozen=True)
class DisparityErrorResult:
    aggregate: float
    per_frame: list
    excluded: list


def _cost_volume(gl: np.ndarray, gr: np.ndarray, cfg: SgmConfig) -> np.ndarray:
    height, width = gl.shape
    n_disp = cfg.d_max - cfg.d_min + 1
    cost = np.empty((height, width, n_disp), dtype=np.float32)
    for i, d in enumerate(range(cfg.d_min, cfg.d_max + 1)):
        absdiff = np.full((height, width), _COST_BIG, dtype=np.float32)
        lo = max(0, d)
        hi = width + min(0, d)
        if hi > lo:
            absdiff[:, lo:hi] = np.abs(gl[:, lo:hi] - gr[:, lo - d : hi - d]) * 255.0
        cost[:, :, i] = box_mean(absdiff, cfg.block)
    return cost


def _dp_step(prev: np.ndarray, cost: np.ndarray, p1: np.float32, p2: np.float32) -> np.ndarray:
    """min over {stay, +/-1 step + p1, any jump + p2}, normalized by min(prev)."""
    m = prev.min(axis=-1, keepdims=True)
    best = np.minimum(prev, m + p2)
    best[..., 1:] = np.minimum(best[..., 1:], prev[..., :-1] + p1)
    best[..., :-1] = np.minimum(best[..., :-1], prev[..., 1:] + p1)
    return cost + best - m


def _aggregate(cost: np.ndarray, cfg: SgmConfig) -> np.ndarray:
    height, width, _ = cost.shape
    p1, p2 = np.float32(cfg.p1), np.float32(cfg.p2)
    total = np.zeros_like(cost)

    horizontal = [(range(1, width), -1), (range(width - 2, -1, -1), +1)]
    for cols, step in horizontal:
        acc = np.empty_like(cost)
        first = width - 1 if step == 1 else 0
        acc[:, first] = cost[:, first]
        for x in cols:
            acc[:, x] = _dp_step(acc[:, x + step], cost[:, x], p1, p2)
        total += acc

    if cfg.paths == 4:
        vertical = [(range(1, height), -1), (range(height - 2, -1, -1), +1)]
        for rows, step in vertical:
            acc = np.empty_like(cost)
            first = height - 1 if step == 1 else 0
            acc[first] = cost[first]
            for y in rows:
                acc[y] = _dp_step(acc[y + step], cost[y], p1, p2)
            total += acc
    return total


def estimate_disparity(left: np.ndarray, right: np.ndarray, cfg: SgmConfig = SgmConfig()) -> DisparityMap:
    """Semi-global disparity of a rectified pair, left-referenced.

    Winner-take-all over the aggregated costs (ties pick the smallest
    disparity); pixels failing the uniqueness margin, the left-right
    consistency check, or whose SAD window exits the image are invalid.
    """
    if left.shape != right.shape:
        raise ValueError(f"shape mismatch: {left.shape} vs {right.shape}")
    height, width = left.shape[:2]
    if cfg.d_max >= width:
        raise ValueError(f"d_max {cfg.d_max} must be smaller than image width {width}")

    gl = to_gray(left).astype(np.float32)
    gr = to_gray(right).astype(np.float32)
    cost = _cost_volume(gl, gr, cfg)

    # ambiguity check on the raw matching cost: when all offsets (nearly)
    # tie, any winner is arbitrary, aggregation boundary ramps included
    raw_idx = np.argmin(cost, axis=2)
    raw_best = np.take_along_axis(cost, raw_idx[:, :, None], axis=2)[:, :, 0]
    disp_axis = np.arange(cost.shape[2])
    near = np.abs(disp_axis[None, None, :] - raw_idx[:, :, None]) <= 1
    raw_second = np.where(near, _INF, cost).min(axis=2)
    unique_ok = (raw_second - raw_best) >= cfg.uniq_margin

    agg = _aggregate(cost, cfg)
    idx = np.argmin(agg, axis=2)
    d_left = cfg.d_min + idx
    best = np.take_along_axis(agg, idx[:, :, None], axis=2)[:, :, 0]

    # right-referenced winner from the same aggregated volume:
    # cost of right pixel u at disparity d is the left cost at (u + d, d)
    agg_right = np.full_like(agg, _INF)
    for i, d in enumerate(range(cfg.d_min, cfg.d_max + 1)):
        lo = max(0, -d)
        hi = width - max(0, d)
        if hi > lo:
            agg_right[:, lo:hi, i] = agg[:, lo + d : hi + d, i]
    d_right = cfg.d_min + np.argmin(agg_right, axis=2)

    cols = np.arange(width)[None, :]
    partner = np.clip(cols - d_left, 0, width - 1)
    in_range = (cols - d_left >= 0) & (cols - d_left < width)
    lr_ok = in_range & (
        np.abs(d_left - np.take_along_axis(d_right, partner, axis=1)) <= cfg.lr_tol
    )

    margin = cfg.block // 2
    interior = np.zeros((height, width), dtype=bool)
    if height > 2 * margin and width > 2 * margin:
        interior[margin : height - margin, margin : width - margin] = True

    valid = interior & lr_ok & unique_ok & np.isfinite(best) & (best < _COST_BIG)
    return DisparityMap(values=d_left.astype(np.float64), valid=valid)


def align_lsq(pred: DisparityMap, gt: DisparityMap) -> AlignmentResult:
    """Closed-form (a, b) minimizing sum((a*pred + b - gt)^2) over jointly-valid
    pixels, plus the mean absolute error of the aligned prediction."""
    if pred.values.shape != gt.values.shape:
        raise ValueError(f"shape mismatch: {pred.values.shape} vs {gt.values.shape}")
    joint = pred.valid & gt.valid
    n = int(joint.sum())
    if n < 2:
        raise DegenerateAlignmentError(f"only {n} jointly-valid pixels (need >= 2)")
    p = pred.values[joint]
    g = gt.values[joint]
    p_mean = p.mean()
    var = np.mean((p - p_mean) ** 2)
    if var == 0.0:
        raise DegenerateAlignmentError("constant prediction: gain undefined")
    a = float(np.mean((p - p_mean) * (g - g.mean())) / var)
    b = float(g.mean() - a * p_mean)
    mae = float(np.abs(a * p + b - g).mean())
    return AlignmentResult(a=a, b=b, mae=mae)


def disparity_error(
    stereo_pred: StereoClip,
    gt_disp: list,
    cfg: SgmConfig = SgmConfig(),
    min_joint_fraction: float = 0.01,
) -> DisparityErrorResult:
    """Per-frame aligned MAE between estimated and ground-truth disparities.

    The disparity of each (left, generated-right) pair is estimated, aligned
    to the ground truth by least squares, and its MAE recorded; the aggregate
    is the mean over frames. Frames with a degenerate alignment or fewer than
    min_joint_fraction jointly-valid pixels are excluded and listed.
    """
    n = len(stereo_pred.left)
    if len(gt_disp) != n:
        raise ValueError(f"frame count mismatch: clip has {n}, gt list has {len(gt_disp)}")
    per_frame: list = []
    excluded: list = []
    for t in range(n):
        est = estimate_disparity(stereo_pred.left.frames[t], stereo_pred.right.frames[t], cfg)
        joint = est.valid & gt_disp[t].valid
        if joint.sum() < min_joint_fraction * joint.size:
            per_frame.append(None)
            excluded.append(t)
            continue
        try:
            per_frame.append(align_lsq(est, gt_disp[t]).mae)
        except DegenerateAlignmentError:
            per_frame.append(None)
            excluded.append(t)
    kept = [m for m in per_frame if m is not None]
    if not kept:
        raise DegenerateAlignmentError("every frame was excluded from the disparity error")
    return DisparityErrorResult(aggregate=float(np.mean(kept)), per_frame=per_frame, excluded=excluded)
