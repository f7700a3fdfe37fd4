"""Frame, clip, disparity and report I/O.

On-disk conventions:

* video clips: a directory of 8-bit PNG frames named by zero-padded index
  (``000.png`` .. ``015.png``; six digits for long clips)
* disparity maps: single-channel PFM, bottom-up raster, endianness given by
  the sign of the scale line; non-finite samples are treated as invalid
* evaluation reports: UTF-8 JSON, floats at full precision

Pixel values are converted to float in [0, 1] on load (``x / 255``) and all
loaded objects are treated as immutable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class ClipError(ValueError):
    """A frame directory violates the clip contract (names the offending path)."""


class PfmError(ValueError):
    """Malformed PFM header or unsupported channel count."""


@dataclass(frozen=True)
class VideoClip:
    """Ordered frame stack of shape (N, H, W, 3), float values in [0, 1].

    ``fps`` is carried as metadata only; no metric depends on it.
    """

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4 or f.shape[3] != 3:
            raise ValueError(f"clip frames must have shape (N, H, W, 3), got {f.shape}")
        if f.shape[0] < 1:
            raise ValueError("clip must contain at least one frame")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class StereoClip:
    """A rectified left/right clip pair with identical N, H, W."""

    left: VideoClip
    right: VideoClip
    rectified: bool = True

    def __post_init__(self):
        if self.left.frames.shape != self.right.frames.shape:
            raise ValueError(
                f"left/right shape mismatch: {self.left.frames.shape} vs {self.right.frames.shape}"
            )


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel horizontal left-to-right displacement in pixels, plus validity.

    Sign convention: positive disparity d at left pixel (u, v) means the
    corresponding right-view pixel sits at (u - d, v).
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"disparity values must be 2-D, got shape {self.values.shape}")
        if self.valid.shape != self.values.shape:
            raise ValueError("validity mask shape must match values")
        if self.valid.dtype != np.bool_:
            raise ValueError("validity mask must be boolean")
        if not np.all(np.isfinite(self.values[self.valid])):
            raise ValueError("disparity values must be finite where valid")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class EvaluationReport:
    """Scalar metric results plus per-frame breakdowns and a config echo.

    Aggregation rules (re-checkable from the per-frame entries):

    * ``psnr`` / ``p_psnr``: one dB value from the mean of per-frame MSEs
      (``per_frame["psnr_mse"]`` / ``per_frame["p_psnr_mse"]``)
    * ``ssim``: arithmetic mean of per-frame values
    * ``match_error``: recomputed from match counts pooled over frames
    * ``disp_err``: mean of per-frame MAEs, excluded frames dropped
    * ``temp_err``: end-point error pooled over all counted pixels,
      i.e. sum(per_pair_mean * per_pair_pixels) / sum(per_pair_pixels)
    """

    psnr: float | None = None
    ssim: float | None = None
    p_psnr: float | None = None
    match_error: float | None = None
    match_counts: dict | None = None
    disp_err: float | None = None
    temp_err: float | None = None
    per_frame: dict = field(default_factory=dict)
    excluded_frames: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(**d)


def _frame_from_file(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ClipError(f"unreadable frame: {path}") from exc
    return arr.astype(np.float64) / 255.0


def load_frame(path: str | Path) -> np.ndarray:
    """Load a single 8-bit image as an (H, W, 3) float array in [0, 1]."""
    return _frame_from_file(Path(path))


def save_frame(frame: np.ndarray, path: str | Path) -> None:
    """Save an (H, W, 3) float frame as 8-bit PNG (values clipped to [0, 1])."""
    data = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(Path(path))


def _indexed_frame_files(directory: Path) -> list[Path]:
    files = [p for p in directory.iterdir() if p.suffix.lower() == ".png"]
    if not files:
        raise ClipError(f"no PNG frames in directory: {directory}")
    for p in files:
        if not p.stem.isdigit():
            raise ClipError(f"frame file not named by numeric index: {p}")
    return sorted(files, key=lambda p: int(p.stem))


def load_clip(path: str | Path, fps: float = 30.0) -> VideoClip:
    """Load a directory of index-named PNG frames as a VideoClip.

    Frames are ordered by their numeric stem. All frames must share the same
    dimensions; a mismatch raises ClipError naming the offending file.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"clip directory not found: {directory}")
    files = _indexed_frame_files(directory)
    frames = []
    shape = None
    for p in files:
        arr = _frame_from_file(p)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ClipError(
                f"frame size mismatch: {p} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
        frames.append(arr)
    return VideoClip(frames=np.stack(frames, axis=0), fps=fps)


def save_clip(clip: VideoClip, path: str | Path) -> None:
    """Write a clip as a PNG sequence (``%03d.png``, ``%06d.png`` for N > 1000)."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    digits = 3 if len(clip) <= 1000 else 6
    for i in range(len(clip)):
        save_frame(clip.frames[i], directory / f"{i:0{digits}d}.png")


def load_disparity(path: str | Path) -> DisparityMap:
    """Read a single-channel PFM file; NaN/Inf samples become valid=False."""
    p = Path(path)
    with open(p, "rb") as fh:
        header = fh.readline().strip()
        if header == b"PF":
            raise PfmError(f"{p}: 3-channel PFM, expected single channel ('Pf')")
        if header != b"Pf":
            raise PfmError(f"{p}: not a PFM file (header {header!r})")
        try:
            width, height = (int(t) for t in fh.readline().split())
            scale = float(fh.readline())
        except (ValueError, IndexError) as exc:
            raise PfmError(f"{p}: malformed PFM header") from exc
        if width < 1 or height < 1:
            raise PfmError(f"{p}: bad PFM dimensions {width}x{height}")
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(4 * width * height), dtype=dtype)
        if data.size != width * height:
            raise PfmError(f"{p}: truncated PFM data")
    # PFM rasters run bottom-up
    values = data.reshape(height, width)[::-1].astype(np.float64)
    valid = np.isfinite(values)
    return DisparityMap(values=np.where(valid, values, 0.0), valid=valid)


def save_disparity(d: DisparityMap, path: str | Path) -> None:
    """Write a DisparityMap as little-endian single-channel PFM (invalid -> NaN)."""
    values = np.where(d.valid, d.values, np.nan).astype(np.float32)
    with open(Path(path), "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{d.width} {d.height}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(values[::-1].astype("<f4").tobytes())


def save_report(report: EvaluationReport, path: str | Path) -> None:
    """Write a report as JSON; reloading reproduces the numbers exactly."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str | Path) -> EvaluationReport:
    with open(Path(path), "r", encoding="utf-8") as fh:
        return EvaluationReport.from_dict(json.load(fh))
