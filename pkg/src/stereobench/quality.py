"""Overall-quality metrics (PSNR, SSIM) and patch-wise PSNR with row search.

All metrics operate on RGB float frames in [0, 1] and average over channels;
no luma conversion or gamma handling is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from stereobench.media_io import VideoClip

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2

DEFAULT_PSNR_CAP = 100.0


@dataclass(frozen=True)
class PatchPsnrConfig:
    """Patch-wise PSNR parameters.

    A patch x patch block grid is laid over the reference at the given
    stride; each block is compared against every horizontal placement within
    +/- search_range in the other image, and the minimum SSD wins. The grid
    keeps a horizontal margin of search_range so that every placement within
    the range stays in bounds; partial edge patches are skipped. Per-patch
    best MSEs are pooled (mean) and converted to a single dB value, capped at
    psnr_cap for zero error.
    """

    patch: int = 16
    stride: int = 16
    search_range: int = 32
    psnr_cap: float = DEFAULT_PSNR_CAP

    def __post_init__(self):
        if self.patch < 1:
            raise ValueError(f"patch must be >= 1, got {self.patch}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.search_range < 0:
            raise ValueError(f"search_range must be >= 0, got {self.search_range}")
        if not math.isfinite(self.psnr_cap):
            raise ValueError("psnr_cap must be finite")


def _as_array(x) -> np.ndarray:
    if isinstance(x, VideoClip):
        return x.frames
    return np.asarray(x)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a, b) -> float:
    a, b = _as_array(a), _as_array(b)
    _check_shapes(a, b)
    return float(np.mean((a - b) ** 2))


def _db_from_mse(m: float, cap: float) -> float:
    if m <= 0.0:
        return cap
    return min(10.0 * math.log10(1.0 / m), cap)


def psnr(a, b, cap: float = DEFAULT_PSNR_CAP) -> float:
    """10 * log10(1 / MSE) over all pixels, channels and frames, capped at `cap` dB.

    Accepts single frames or frame stacks / VideoClips of matching shape.
    """
    return _db_from_mse(mse(a, b), cap)


def _ssim_kernel() -> np.ndarray:
    r = _SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * _SSIM_SIGMA**2))
    return k / k.sum()


_KERNEL_1D = _ssim_kernel()


def _window_mean(img: np.ndarray) -> np.ndarray:
    """Gaussian-weighted window mean, cropped to fully-supported pixels."""
    r = _SSIM_WINDOW // 2
    out = ndimage.correlate1d(img, _KERNEL_1D, axis=0, mode="constant")
    out = ndimage.correlate1d(out, _KERNEL_1D, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a, b) -> float:
    """Windowed SSIM with an 11x11 Gaussian window, sigma 1.5, on [0, 1] data.

    C1 = 0.01^2 and C2 = 0.03^2; the result is averaged over channels and all
    fully-supported window positions and lies in [-1, 1].
    """
    a, b = _as_array(a), _as_array(b)
    _check_shapes(a, b)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"ssim expects a single (H, W, 3) frame, got {a.shape}")
    if a.shape[0] < _SSIM_WINDOW or a.shape[1] < _SSIM_WINDOW:
        raise ValueError(f"image {a.shape[:2]} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window")

    channel_means = []
    for c in range(3):
        x, y = a[..., c], b[..., c]
        mu_x = _window_mean(x)
        mu_y = _window_mean(y)
        var_x = _window_mean(x * x) - mu_x**2
        var_y = _window_mean(y * y) - mu_y**2
        cov = _window_mean(x * y) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
        den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
        channel_means.append(np.mean(num / den))
    return float(np.mean(channel_means))


def _patch_grid(height: int, width: int, cfg: PatchPsnrConfig):
    rows = np.arange(0, height - cfg.patch + 1, cfg.stride)
    col_lo = cfg.search_range
    col_hi = width - cfg.search_range - cfg.patch
    cols = np.arange(col_lo, col_hi + 1, cfg.stride) if col_hi >= col_lo else np.arange(0)
    return rows, cols


def patch_best_mse(left: np.ndarray, right: np.ndarray, cfg: PatchPsnrConfig) -> float:
    """Mean over the patch grid of each patch's best (minimum-SSD) MSE."""
    _check_shapes(left, right)
    if left.ndim != 3:
        raise ValueError(f"expected a single (H, W, 3) frame, got {left.shape}")
    height, width = left.shape[:2]
    if height < cfg.patch or width < cfg.patch:
        raise ValueError(f"image {left.shape[:2]} smaller than one {cfg.patch}x{cfg.patch} patch")
    rows, cols = _patch_grid(height, width, cfg)
    if rows.size == 0 or cols.size == 0:
        raise ValueError(
            f"no patch fits: image {left.shape[:2]}, patch {cfg.patch}, "
            f"search range {cfg.search_range}"
        )

    best = np.full((rows.size, cols.size), np.inf)
    p = cfg.patch
    for off in range(-cfg.search_range, cfg.search_range + 1):
        x0 = max(0, -off)
        x1 = width - max(0, off)
        sq = ((left[:, x0:x1] - right[:, x0 + off : x1 + off]) ** 2).sum(axis=2)
        ii = np.pad(sq, ((1, 0), (1, 0))).cumsum(axis=0).cumsum(axis=1)
        r = rows[:, None]
        c = (cols - x0)[None, :]
        sums = ii[r + p, c + p] - ii[r, c + p] - ii[r + p, c] + ii[r, c]
        np.minimum(best, sums, out=best)
    return float(best.mean() / (p * p * 3))


def patch_psnr(left, right_pred, cfg: PatchPsnrConfig = PatchPsnrConfig()) -> float:
    """PSNR between reference patches and their best row-aligned counterparts.

    Robust to horizontal misalignment up to cfg.search_range by construction:
    every patch keeps access to all placements within the range.
    """
    return _db_from_mse(patch_best_mse(_as_array(left), _as_array(right_pred), cfg), cfg.psnr_cap)


def clip_metric(metric, clip_a, clip_b, cfg: PatchPsnrConfig | None = None, cap: float = DEFAULT_PSNR_CAP):
    """Apply a frame metric over two clips; returns (per_frame, aggregate).

    ``metric`` is "psnr", "ssim", "ppsnr" or a callable(frame_a, frame_b).
    The aggregate is the arithmetic mean of per-frame values, except for
    "psnr"/"ppsnr" where per-frame MSEs are pooled first and converted to dB
    once, avoiding the bias of averaging dB values.
    """
    a, b = _as_array(clip_a), _as_array(clip_b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"clip length mismatch: {a.shape[0]} vs {b.shape[0]}")

    if metric == "psnr":
        mses = [mse(a[i], b[i]) for i in range(a.shape[0])]
        per_frame = [_db_from_mse(m, cap) for m in mses]
        return per_frame, _db_from_mse(float(np.mean(mses)), cap)
    if metric == "ppsnr":
        c = cfg if cfg is not None else PatchPsnrConfig()
        mses = [patch_best_mse(a[i], b[i], c) for i in range(a.shape[0])]
        per_frame = [_db_from_mse(m, c.psnr_cap) for m in mses]
        return per_frame, _db_from_mse(float(np.mean(mses)), c.psnr_cap)
    fn = ssim if metric == "ssim" else metric
    per_frame = [float(fn(a[i], b[i])) for i in range(a.shape[0])]
    return per_frame, float(np.mean(per_frame))
