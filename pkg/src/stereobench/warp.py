"""Disparity statistics, scaled forward warping and stereo-pair synthesis.

The scalar 3D-strength knob is the median of the valid disparity values;
scaling the disparity map by s scales the knob to s * delta exactly, since
order statistics commute with positive scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stereobench.media_io import DisparityMap

# Discrete augmentation factors for synthetic-baseline generation.
DEFAULT_SCALE_FACTORS = (0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.25, 1.5, 2.0, 3.0)


@dataclass(frozen=True)
class ScaleSet:
    """An ordered set of positive disparity scaling factors."""

    factors: tuple = DEFAULT_SCALE_FACTORS

    def __post_init__(self):
        if not self.factors:
            raise ValueError("scale set must not be empty")
        if any(f <= 0 for f in self.factors):
            raise ValueError(f"scale factors must be positive, got {self.factors}")


@dataclass(frozen=True)
class WarpResult:
    """A forward-warped view plus its validity mask.

    valid=False marks disocclusion holes (no source pixel splatted there);
    those pixels hold the deterministic fill value 0. Consumers must honor
    the mask rather than the fill.
    """

    image: np.ndarray
    valid: np.ndarray


def _valid_values(d: DisparityMap) -> np.ndarray:
    vals = d.values[d.valid]
    if vals.size == 0:
        raise ValueError("disparity map has no valid pixels")
    return vals


def median_disparity(d: DisparityMap) -> float:
    """50th percentile of the valid disparity values (lower median for even counts)."""
    vals = np.sort(_valid_values(d))
    return float(vals[(vals.size - 1) // 2])


def percentile_disparity(d: DisparityMap, p: float) -> float:
    """Order statistic over valid values; p=50 equals median_disparity.

    Uses the nearest-rank-below rule: index floor(p * (n - 1) / 100).
    """
    if not 0 <= p <= 100:
        raise ValueError(f"percentile must be in [0, 100], got {p}")
    vals = np.sort(_valid_values(d))
    idx = min(int(math.floor(p * (vals.size - 1) / 100.0)), vals.size - 1)
    return float(vals[idx])


def mean_disparity(d: DisparityMap) -> float:
    """Average disparity, an alternative conditioning scalar to the median."""
    return float(_valid_values(d).mean())


def max_disparity(d: DisparityMap) -> float:
    """Maximum disparity, an alternative conditioning scalar to the median."""
    return float(_valid_values(d).max())


def forward_warp(left: np.ndarray, d: DisparityMap, s: float) -> WarpResult:
    """Splat left pixels to target column u - round(s * d(u, v)).

    Collisions are resolved by the larger scaled disparity (nearer surface
    wins); equal disparities fall back to the later source pixel in row-major
    order. Rounding is nearest-integer, ties to even. Untouched targets get
    value 0 and valid=False.

    s = 0 is the exact identity with a full mask, regardless of the map's
    validity pattern (the zero-scale target is the input frame itself).
    """
    if left.ndim != 3 or left.shape[2] != 3:
        raise ValueError(f"left frame must have shape (H, W, 3), got {left.shape}")
    if d.values.shape != left.shape[:2]:
        raise ValueError(
            f"disparity shape {d.values.shape} does not match frame {left.shape[:2]}"
        )
    if s < 0:
        raise ValueError(f"scale must be non-negative, got {s}")

    height, width = d.values.shape
    if s == 0:
        return WarpResult(image=left.copy(), valid=np.ones((height, width), dtype=bool))

    vv, uu = np.nonzero(d.valid)
    scaled = s * d.values[vv, uu]
    target = uu - np.rint(scaled).astype(np.int64)
    keep = (target >= 0) & (target < width)
    vv, uu, target, scaled = vv[keep], uu[keep], target[keep], scaled[keep]

    # Ascending z-order: with duplicate targets the last assignment wins,
    # so the largest scaled disparity ends up in the output.
    order = np.argsort(scaled, kind="stable")
    vv, uu, target = vv[order], uu[order], target[order]

    image = np.zeros_like(left)
    valid = np.zeros((height, width), dtype=bool)
    image[vv, target] = left[vv, uu]
    valid[vv, target] = True
    return WarpResult(image=image, valid=valid)


def masked_l1(a: np.ndarray, b: np.ndarray, valid: np.ndarray) -> float:
    """Mean absolute difference over valid pixels and all channels."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if valid.shape != a.shape[:2]:
        raise ValueError(f"mask shape {valid.shape} does not match frames {a.shape[:2]}")
    if not valid.any():
        raise ValueError("mask excludes every pixel")
    return float(np.abs(a - b)[valid].mean())


def make_augmented_pair(left: np.ndarray, d: DisparityMap, s: float):
    """Warp the left view at scale s and return the scaled conditioning scalar.

    Returns (WarpResult, s * median_disparity(d)); the scalar scales exactly
    because the median commutes with positive scaling.
    """
    delta = median_disparity(d)
    return forward_warp(left, d, s), s * delta


def anaglyph(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Red/cyan anaglyph: red from the left view, green and blue from the right."""
    if left.shape != right.shape:
        raise ValueError(f"shape mismatch: {left.shape} vs {right.shape}")
    out = right.copy()
    out[..., 0] = left[..., 0]
    return out
