"""Small shared image-processing helpers (grayscale, blur, shifting)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def to_gray(frame: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (H, W, 3) frame."""
    r, g, b = GRAY_WEIGHTS
    return r * frame[..., 0] + g * frame[..., 1] + b * frame[..., 2]


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur with the kernel truncated at 3*sigma and renormalized.

    Works on (H, W) and (H, W, C) arrays; channels are filtered independently.
    """
    if sigma <= 0:
        raise ValueError(f"blur sigma must be positive, got {sigma}")
    sig = [sigma, sigma] + [0.0] * (img.ndim - 2)
    return ndimage.gaussian_filter(img, sigma=sig, truncate=3.0, mode="reflect")


def box_mean(img: np.ndarray, size: int) -> np.ndarray:
    """Mean over a size x size window, edges clamped (nearest replication)."""
    return ndimage.uniform_filter(img, size=size, mode="nearest")


def shift_horizontal(frame: np.ndarray, k: int) -> np.ndarray:
    """Shift content horizontally by k pixels (positive = rightward), zero fill.

    Columns shifted in from outside the frame are zeros; callers decide how
    to exclude them from comparisons.
    """
    out = np.zeros_like(frame)
    if k == 0:
        out[...] = frame
    elif k > 0:
        out[:, k:] = frame[:, : frame.shape[1] - k]
    else:
        out[:, :k] = frame[:, -k:]
    return out
