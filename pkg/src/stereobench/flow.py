"""Coarse-to-fine block-matching optical flow and the temporal end-point error.

Flow is integer and deterministic: grayscale pyramids (2x downsampling after
a 5-tap binomial filter), and at each level an exhaustive SSD search within
+/- radius around the doubled coarser estimate. Candidate offsets are
visited nearest-first so that exact ties resolve to the smallest motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from stereobench.imgproc import box_mean, to_gray
from stereobench.media_io import VideoClip

_BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class FlowConfig:
    levels: int = 3
    block: int = 9
    radius: int = 4

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.block % 2 != 1 or self.block < 1:
            raise ValueError(f"block must be odd and positive, got {self.block}")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass(frozen=True)
class FlowField:
    """Per-pixel motion (du, dv) in pixels, stacked as vectors[..., 0]=du,
    vectors[..., 1]=dv, plus a border mask of pixels whose matching window
    was clamped at an image edge (excluded from the end-point error)."""

    vectors: np.ndarray
    border: np.ndarray


@dataclass(frozen=True)
class TemporalErrorResult:
    aggregate: float
    per_pair: list
    per_pair_pixels: list


def _downsample(img: np.ndarray) -> np.ndarray:
    sm = ndimage.correlate1d(img, _BINOMIAL, axis=0, mode="nearest")
    sm = ndimage.correlate1d(sm, _BINOMIAL, axis=1, mode="nearest")
    return sm[::2, ::2]


def _pyramid(gray: np.ndarray, levels: int) -> list:
    pyr = [gray]
    for _ in range(levels - 1):
        pyr.append(_downsample(pyr[-1]))
    return pyr


def _offsets(radius: int) -> list:
    offs = [(dv, du) for dv in range(-radius, radius + 1) for du in range(-radius, radius + 1)]
    offs.sort(key=lambda o: (o[0] ** 2 + o[1] ** 2, o[0], o[1]))
    return offs


def _gather(img: np.ndarray, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    height, width = img.shape
    ys, xs = np.mgrid[0:height, 0:width]
    return img[np.clip(ys + dv, 0, height - 1), np.clip(xs + du, 0, width - 1)]


def optical_flow(f0: np.ndarray, f1: np.ndarray, cfg: FlowConfig = FlowConfig()) -> FlowField:
    """Integer flow from f0 to f1 by pyramidal block SSD matching.

    Each level searches residual offsets on the f1 image pre-warped by the
    median-smoothed upsampled coarser flow, which treats the motion as
    locally constant within a block. The reach therefore extends well past
    the per-level radius: ~radius * (2^levels - 1) pixels at the finest
    scale. A final small-radius refinement against the median of the
    finest-level field cleans up pixels whose windows straddled an
    inconsistent prior (skipped when the field is already self-consistent).
    """
    if f0.shape != f1.shape:
        raise ValueError(f"shape mismatch: {f0.shape} vs {f1.shape}")
    g0 = to_gray(f0).astype(np.float32) if f0.ndim == 3 else f0.astype(np.float32)
    g1 = to_gray(f1).astype(np.float32) if f1.ndim == 3 else f1.astype(np.float32)
    height, width = g0.shape
    min_dim = 2 ** (cfg.levels - 1) * cfg.block
    if height < min_dim or width < min_dim:
        raise ValueError(
            f"image {g0.shape} smaller than 2^(levels-1) * block = {min_dim}"
        )

    pyr0 = _pyramid(g0, cfg.levels)
    pyr1 = _pyramid(g1, cfg.levels)

    def search(a, b, du, dv, radius):
        h, w = a.shape
        warped = _gather(b, du, dv)
        padded = np.pad(warped, radius, mode="edge")
        offsets = _offsets(radius)
        best = np.full((h, w), np.inf, dtype=np.float32)
        winner = np.zeros((h, w), dtype=np.int32)
        for i, (odv, odu) in enumerate(offsets):
            shifted = padded[radius + odv : radius + odv + h, radius + odu : radius + odu + w]
            diff = a - shifted
            ssd = box_mean(diff * diff, cfg.block)
            better = ssd < best
            np.copyto(best, ssd, where=better)
            np.copyto(winner, i, where=better)
        odv, odu = np.asarray(offsets).T
        return du + odu[winner], dv + odv[winner]

    def _sep_median(field):
        out = ndimage.median_filter(field, size=(1, 9), mode="nearest")
        return ndimage.median_filter(out, size=(9, 1), mode="nearest")

    def smoothed(du, dv):
        # fractional motion at coarse scales makes the integer winner flip
        # pixel-to-pixel; a (separable) median keeps the prior locally
        # constant so the next search's windows stay coherent
        return _sep_median(du), _sep_median(dv)

    du = np.zeros(pyr0[-1].shape, dtype=np.int64)
    dv = np.zeros(pyr0[-1].shape, dtype=np.int64)
    for level in range(cfg.levels - 1, -1, -1):
        a, b = pyr0[level], pyr1[level]
        h, w = a.shape
        if level < cfg.levels - 1:
            du = np.repeat(np.repeat(du * 2, 2, axis=0), 2, axis=1)[:h, :w]
            dv = np.repeat(np.repeat(dv * 2, 2, axis=0), 2, axis=1)[:h, :w]
            du, dv = smoothed(du, dv)
        du, dv = search(a, b, du, dv, cfg.radius)
        if level == 0:
            mdu, mdv = smoothed(du, dv)
            if not (np.array_equal(mdu, du) and np.array_equal(mdv, dv)):
                du, dv = search(a, b, mdu, mdv, min(cfg.radius, 2))

    half = cfg.block // 2
    ys, xs = np.mgrid[0:height, 0:width]
    border = (
        (ys < half)
        | (ys >= height - half)
        | (xs < half)
        | (xs >= width - half)
        | (xs + du < half)
        | (xs + du >= width - half)
        | (ys + dv < half)
        | (ys + dv >= height - half)
    )
    vectors = np.stack([du, dv], axis=-1).astype(np.float64)
    return FlowField(vectors=vectors, border=border)


def temporal_error(
    gt_right: VideoClip, pred_right: VideoClip, cfg: FlowConfig = FlowConfig()
) -> TemporalErrorResult:
    """End-point error between the flows of the true and generated videos.

    For every consecutive pair the flows of both videos are computed and the
    per-pixel Euclidean deviation is averaged over all non-border pixels and
    all pairs (pooled by pixel count).
    """
    n = len(gt_right)
    if len(pred_right) != n:
        raise ValueError(f"clip length mismatch: {n} vs {len(pred_right)}")
    if gt_right.frames.shape[1:] != pred_right.frames.shape[1:]:
        raise ValueError("clip frame shapes differ")
    if n < 2:
        raise ValueError("temporal error needs at least two frames")

    per_pair, per_pixels = [], []
    total, count = 0.0, 0
    for t in range(n - 1):
        f_gt = optical_flow(gt_right.frames[t], gt_right.frames[t + 1], cfg)
        f_pr = optical_flow(pred_right.frames[t], pred_right.frames[t + 1], cfg)
        keep = ~(f_gt.border | f_pr.border)
        epe = np.sqrt(((f_gt.vectors - f_pr.vectors) ** 2).sum(axis=-1))[keep]
        per_pair.append(float(epe.mean()) if epe.size else None)
        per_pixels.append(int(epe.size))
        total += float(epe.sum())
        count += epe.size
    if count == 0:
        raise ValueError("no non-border pixels to pool the end-point error over")
    return TemporalErrorResult(aggregate=total / count, per_pair=per_pair, per_pair_pixels=per_pixels)
