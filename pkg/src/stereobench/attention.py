"""Row-constrained (epipolar) cross-attention, its dense reference, the
guidance-pyramid stub, and the attention-matrix memory model.

For a rectified pair the epipolar line of a pixel is its image row, so the
cross-attention of a decoder feature h(p) at p = (u, v) reads keys and
values only from row v of the guidance map g:

    Q_p   = h(p) W_q
    K_row = g[v] W_k,  V_row = g[v] W_v
    alpha = softmax(Q_p K_row^T / sqrt(d)) V_row
    out(p) = h(p) + alpha W_out

With W_out zero-initialized the module is the identity mapping. The softmax
subtracts the row maximum before exponentiation so large-magnitude features
cannot overflow.

Weights file format (little-endian): magic ``EAW1``, uint32 C, uint32 D,
then float32 row-major arrays w_q (C*D), w_k (C*D), w_v (C*D), w_out (D*C).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stereobench.imgproc import gaussian_blur, to_gray

_WEIGHTS_MAGIC = b"EAW1"


@dataclass(frozen=True)
class AttentionWeights:
    """Projection matrices: w_q, w_k, w_v of shape (C, d) and w_out of (d, C)."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        c, d = self.w_q.shape
        for name, m, shape in (
            ("w_k", self.w_k, (c, d)),
            ("w_v", self.w_v, (c, d)),
            ("w_out", self.w_out, (d, c)),
        ):
            if m.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {m.shape}")
        if d < 1:
            raise ValueError("head dimension must be >= 1")
        for name, m in (("w_q", self.w_q), ("w_k", self.w_k), ("w_v", self.w_v), ("w_out", self.w_out)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]

    @property
    def d(self) -> int:
        return self.w_q.shape[1]

    @classmethod
    def random(cls, channels: int, d: int, seed: int = 0, zero_output: bool = False):
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(channels)
        w_out = np.zeros((d, channels)) if zero_output else rng.standard_normal((d, channels)) / np.sqrt(d)
        return cls(
            w_q=rng.standard_normal((channels, d)) * scale,
            w_k=rng.standard_normal((channels, d)) * scale,
            w_v=rng.standard_normal((channels, d)) * scale,
            w_out=w_out,
        )


def _stable_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def epipolar_attention(h: np.ndarray, g: np.ndarray, w: AttentionWeights) -> np.ndarray:
    """Residual row-constrained cross-attention of h over guidance g.

    h and g are (H, W, C) feature maps; every output pixel attends to the W
    positions of its own row in g, and only that row: perturbing any other
    row of g leaves the output row untouched.
    """
    if h.shape != g.shape:
        raise ValueError(f"shape mismatch: h {h.shape} vs g {g.shape}")
    if h.ndim != 3 or h.shape[2] != w.channels:
        raise ValueError(f"feature maps must be (H, W, {w.channels}), got {h.shape}")

    inv_sqrt_d = 1.0 / np.sqrt(w.d)
    out = np.empty_like(h, dtype=np.float64)
    for v in range(h.shape[0]):
        q = h[v] @ w.w_q
        k = g[v] @ w.w_k
        values = g[v] @ w.w_v
        attn = _stable_softmax((q @ k.T) * inv_sqrt_d)
        out[v] = h[v] + (attn @ values) @ w.w_out
    return out


def full_cross_attention_row_masked(h: np.ndarray, g: np.ndarray, w: AttentionWeights) -> np.ndarray:
    """Dense cross-attention over all H*W guidance positions, with the
    attention matrix masked to same-row query/key pairs.

    Mathematically identical to epipolar_attention but materializes the full
    (H*W, H*W) matrix, so it is only usable at small sizes; the size guard
    lives in the CLI, not here.
    """
    if h.shape != g.shape:
        raise ValueError(f"shape mismatch: h {h.shape} vs g {g.shape}")
    height, width, channels = h.shape
    hw = height * width
    hq = h.reshape(hw, channels)
    gk = g.reshape(hw, channels)

    scores = (hq @ w.w_q) @ (gk @ w.w_k).T / np.sqrt(w.d)
    rows = np.repeat(np.arange(height), width)
    mask = rows[:, None] == rows[None, :]
    scores = np.where(mask, scores, -np.inf)
    attn = _stable_softmax(scores)
    out = hq + (attn @ (gk @ w.w_v)) @ w.w_out
    return out.reshape(height, width, channels)


def attention_memory_model(height: int, width: int, bytes_per_element: int, mode: str) -> int:
    """Attention-matrix footprint in bytes.

    mode "epipolar": every pixel attends to its own row -> H * W * W
    elements; mode "full": every pixel attends to every pixel -> (H * W)^2
    elements. Only the attention matrix is counted.
    """
    if height < 1 or width < 1:
        raise ValueError("height and width must be >= 1")
    if mode == "epipolar":
        return height * width * width * bytes_per_element
    if mode == "full":
        return (height * width) ** 2 * bytes_per_element
    raise ValueError(f"unknown mode {mode!r} (expected 'epipolar' or 'full')")


def guided_pyramid_stub(frame: np.ndarray, levels: int, channels: int) -> list:
    """Deterministic hand-crafted guidance pyramid for plumbing and tests.

    Level i is the 2^i-downsampled scale (so H and W must be divisible by
    2^(levels-1)). Channel layout, cycling with j = c // 3:

    * c % 3 == 0: grayscale intensity
    * c % 3 == 1: gradient magnitude (central differences)
    * c % 3 == 2: Gaussian-blurred intensity, sigma = 1 + j

    Constant frames therefore produce all-zero gradient channels at every
    level.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if channels < 1:
        raise ValueError("channels must be >= 1")
    height, width = frame.shape[:2]
    factor = 2 ** (levels - 1)
    if height % factor or width % factor or height < factor or width < factor:
        raise ValueError(
            f"frame {height}x{width} not divisible into {levels} pyramid levels"
        )

    gray = to_gray(frame)
    pyramid = []
    for i in range(levels):
        step = 2**i
        level_gray = gray[::step, ::step]
        gy, gx = np.gradient(level_gray)
        grad = np.sqrt(gx**2 + gy**2)
        feats = np.empty(level_gray.shape + (channels,), dtype=np.float64)
        for c in range(channels):
            kind = c % 3
            if kind == 0:
                feats[..., c] = level_gray
            elif kind == 1:
                feats[..., c] = grad
            else:
                feats[..., c] = gaussian_blur(level_gray, 1.0 + c // 3)
        pyramid.append(feats)
    return pyramid


def save_attention_weights(w: AttentionWeights, path: str | Path) -> None:
    with open(Path(path), "wb") as fh:
        fh.write(_WEIGHTS_MAGIC)
        fh.write(struct.pack("<II", w.channels, w.d))
        for m in (w.w_q, w.w_k, w.w_v, w.w_out):
            fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def load_attention_weights(path: str | Path) -> AttentionWeights:
    p = Path(path)
    with open(p, "rb") as fh:
        magic = fh.read(4)
        if magic != _WEIGHTS_MAGIC:
            raise ValueError(f"{p}: not an attention-weights file (magic {magic!r})")
        channels, d = struct.unpack("<II", fh.read(8))
        shapes = [(channels, d), (channels, d), (channels, d), (d, channels)]
        arrays = []
        for shape in shapes:
            n = shape[0] * shape[1]
            buf = fh.read(4 * n)
            if len(buf) != 4 * n:
                raise ValueError(f"{p}: truncated weights file")
            arrays.append(np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape))
    return AttentionWeights(*arrays)
