"""Keypoint detection, binary descriptors, row-constrained matching, and the
matchability error.

The matching backend is classical and fully deterministic: Harris corners on
the left view, a fixed 256-pair binary descriptor sampled in a 31x31 window
(pattern drawn once from a seeded generator, see PATTERN_SEED), and a ratio
test against candidate positions restricted to a narrow epipolar band. The
matchability error itself is backend-agnostic set algebra over the left
keypoints that found a match in a given right view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from stereobench.imgproc import gaussian_blur, to_gray

# Descriptor geometry: point pairs in a (2*PATTERN_RADIUS+1)^2 window, drawn
# from a center-weighted Gaussian as in classic binary descriptors, so bits
# weight local fine structure over wide-baseline shading.
PATTERN_SEED = 61409
PATTERN_RADIUS = 15
PATTERN_SIGMA = 4.0
DESCRIPTOR_BITS = 256

_rng = np.random.default_rng(PATTERN_SEED)
# (dy1, dx1, dy2, dx2) per bit, fixed for the lifetime of the package.
_PATTERN = np.clip(
    np.rint(_rng.normal(0.0, PATTERN_SIGMA, size=(DESCRIPTOR_BITS, 4))),
    -PATTERN_RADIUS,
    PATTERN_RADIUS,
).astype(np.int64)
del _rng

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

HARRIS_K = 0.04
HARRIS_SIGMA = 1.0
DESCRIPTOR_BLUR_SIGMA = 2.0


@dataclass(frozen=True)
class Keypoint:
    u: int
    v: int
    score: float


@dataclass(frozen=True)
class MatchSet:
    """Left-view keypoints, keyed by (u, v), that matched in a right view."""

    members: frozenset

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class MatchabilityBreakdown:
    """TP/FP/FN decomposition of the match-set comparison.

    error = (n_fp + n_fn) / (n_tp + n_fp + n_fn), which equals one minus the
    Jaccard index of the two sets. Two empty sets give error 0 with the
    degenerate flag raised.
    """

    n_tp: int
    n_fp: int
    n_fn: int
    error: float
    degenerate: bool = False


def harris_response(gray: np.ndarray, k: float = HARRIS_K, sigma: float = HARRIS_SIGMA) -> np.ndarray:
    """Harris corner response: Sobel gradients, Gaussian-windowed structure
    tensor (truncated at 3*sigma), R = det - k * trace^2."""
    ix = ndimage.sobel(gray, axis=1, mode="nearest")
    iy = ndimage.sobel(gray, axis=0, mode="nearest")
    sxx = ndimage.gaussian_filter(ix * ix, sigma, truncate=3.0, mode="nearest")
    syy = ndimage.gaussian_filter(iy * iy, sigma, truncate=3.0, mode="nearest")
    sxy = ndimage.gaussian_filter(ix * iy, sigma, truncate=3.0, mode="nearest")
    return sxx * syy - sxy**2 - k * (sxx + syy) ** 2


def detect_keypoints(
    img: np.ndarray,
    max_count: int = 512,
    nms_radius: int = 4,
    threshold_ratio: float = 0.01,
) -> list[Keypoint]:
    """Harris corners with greedy non-maximum suppression.

    Candidates below threshold_ratio * max(response) are discarded, greedy
    NMS keeps the strongest point per nms_radius neighborhood, and the
    result is the top max_count ordered by (score desc, then (v, u)). A
    border of PATTERN_RADIUS pixels is excluded so descriptors stay in
    bounds. Flat images yield an empty list.
    """
    gray = to_gray(img)
    resp = harris_response(gray)
    peak = float(resp.max(initial=0.0))
    if peak <= 0.0:
        return []
    thresh = threshold_ratio * peak

    local_max = resp == ndimage.maximum_filter(resp, size=2 * nms_radius + 1, mode="nearest")
    cand = resp > thresh
    cand &= local_max
    m = PATTERN_RADIUS
    mask = np.zeros_like(cand)
    mask[m : cand.shape[0] - m, m : cand.shape[1] - m] = True
    cand &= mask

    vs, us = np.nonzero(cand)
    scores = resp[vs, us]
    order = np.lexsort((us, vs, -scores))
    vs, us, scores = vs[order], us[order], scores[order]

    taken_v, taken_u = [], []
    kps = []
    for v, u, s in zip(vs, us, scores):
        if taken_v:
            dv = np.abs(np.asarray(taken_v) - v)
            du = np.abs(np.asarray(taken_u) - u)
            if np.any(np.maximum(dv, du) <= nms_radius):
                continue
        taken_v.append(v)
        taken_u.append(u)
        kps.append(Keypoint(u=int(u), v=int(v), score=float(s)))
        if len(kps) >= max_count:
            break
    return kps


def _descriptor_image(img: np.ndarray) -> np.ndarray:
    return gaussian_blur(to_gray(img), DESCRIPTOR_BLUR_SIGMA)


def _dense_descriptors(base: np.ndarray) -> np.ndarray:
    """Packed (H, W, 32) uint8 descriptor for every pixel of a smoothed image."""
    m = PATTERN_RADIUS
    padded = np.pad(base, m, mode="edge")
    height, width = base.shape
    bits = np.empty((DESCRIPTOR_BITS, height, width), dtype=bool)
    for i, (dy1, dx1, dy2, dx2) in enumerate(_PATTERN):
        a = padded[m + dy1 : m + dy1 + height, m + dx1 : m + dx1 + width]
        b = padded[m + dy2 : m + dy2 + height, m + dx2 : m + dx2 + width]
        bits[i] = a < b
    return np.packbits(bits, axis=0).transpose(1, 2, 0)


def _descriptors_at(base: np.ndarray, vs: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Packed (K, 32) descriptors at the given positions."""
    m = PATTERN_RADIUS
    padded = np.pad(base, m, mode="edge")
    bits = np.empty((DESCRIPTOR_BITS, vs.size), dtype=bool)
    for i, (dy1, dx1, dy2, dx2) in enumerate(_PATTERN):
        a = padded[vs + m + dy1, us + m + dx1]
        b = padded[vs + m + dy2, us + m + dx2]
        bits[i] = a < b
    return np.packbits(bits, axis=0).T


def match_epipolar(
    kps: list[Keypoint],
    left: np.ndarray,
    right: np.ndarray,
    v_tol: int = 2,
    ratio: float = 0.8,
    d_max: int = 64,
    hamming_max: int = 64,
) -> MatchSet:
    """Left keypoints with an epipolar-consistent descriptor match in `right`.

    Candidate positions lie within |dv| <= v_tol rows and |du| <= d_max
    columns of the keypoint. A candidate is accepted when its Hamming
    distance is at most hamming_max and strictly below ratio times the best
    distance outside a 5x5 exclusion zone around the winner (dense candidate
    grids make immediate neighbors near-duplicates, so the classic ratio test
    is applied against the best spatially distinct alternative). Ties pick
    the first candidate in (row, column) order.
    """
    if left.shape != right.shape:
        raise ValueError(f"shape mismatch: {left.shape} vs {right.shape}")
    if not kps:
        return MatchSet(members=frozenset())

    height, width = left.shape[:2]
    m = PATTERN_RADIUS
    vs = np.fromiter((kp.v for kp in kps), dtype=np.int64, count=len(kps))
    us = np.fromiter((kp.u for kp in kps), dtype=np.int64, count=len(kps))
    left_desc = _descriptors_at(_descriptor_image(left), vs, us)
    right_dense = _dense_descriptors(_descriptor_image(right))

    matched = []
    excl = 2
    for idx, kp in enumerate(kps):
        r0 = max(kp.v - v_tol, m)
        r1 = min(kp.v + v_tol, height - 1 - m)
        c0 = max(kp.u - d_max, m)
        c1 = min(kp.u + d_max, width - 1 - m)
        if r1 < r0 or c1 < c0:
            continue
        block = right_dense[r0 : r1 + 1, c0 : c1 + 1]
        dist = _POPCOUNT[block ^ left_desc[idx]].sum(axis=2, dtype=np.int32)
        flat = int(np.argmin(dist))
        bi, bj = divmod(flat, dist.shape[1])
        best = int(dist[bi, bj])
        if best > hamming_max:
            continue
        lo_i, hi_i = max(bi - excl, 0), min(bi + excl + 1, dist.shape[0])
        lo_j, hi_j = max(bj - excl, 0), min(bj + excl + 1, dist.shape[1])
        zone = dist[lo_i:hi_i, lo_j:hi_j].copy()
        dist[lo_i:hi_i, lo_j:hi_j] = np.iinfo(np.int32).max
        second = int(dist.min()) if dist.size else np.iinfo(np.int32).max
        dist[lo_i:hi_i, lo_j:hi_j] = zone
        if best < ratio * second:
            matched.append((kp.u, kp.v))
    return MatchSet(members=frozenset(matched))


def matchability_error(m_gt: MatchSet, m_pred: MatchSet) -> MatchabilityBreakdown:
    """TP/FP/FN counts and the Jaccard-complement error of two match sets."""
    tp = len(m_gt.members & m_pred.members)
    fp = len(m_pred.members - m_gt.members)
    fn = len(m_gt.members - m_pred.members)
    total = tp + fp + fn
    if total == 0:
        return MatchabilityBreakdown(n_tp=0, n_fp=0, n_fn=0, error=0.0, degenerate=True)
    return MatchabilityBreakdown(n_tp=tp, n_fp=fp, n_fn=fn, error=(fp + fn) / total)


def match_status_rows(m_gt: MatchSet, m_pred: MatchSet) -> list[tuple]:
    """(u, v, status) rows over the union of both sets, for CSV dumps."""
    rows = []
    for u, v in sorted(m_gt.members | m_pred.members, key=lambda t: (t[1], t[0])):
        if (u, v) in m_gt.members and (u, v) in m_pred.members:
            status = "tp"
        elif (u, v) in m_pred.members:
            status = "fp"
        else:
            status = "fn"
        rows.append((u, v, status))
    return rows
