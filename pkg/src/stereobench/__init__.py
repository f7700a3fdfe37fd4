"""Deterministic toolkit for evaluating mono-to-stereo video conversion.

The package covers four metric families (overall quality, stereoscopic
fidelity, geometric correctness, temporal stability), a reference
disparity-scaled forward-warp converter with a scalar 3D-strength knob,
and a desk-scale numerical implementation of row-constrained (epipolar)
cross-attention together with its memory accounting.

Everything is pure CPU numpy, deterministic, and file-format friendly:
PNG frame sequences for video, PFM for disparity, JSON for reports.
"""

from stereobench.media_io import (
    DisparityMap,
    EvaluationReport,
    StereoClip,
    VideoClip,
    load_clip,
    load_disparity,
    load_report,
    save_clip,
    save_disparity,
    save_report,
)
from stereobench.warp import (
    DEFAULT_SCALE_FACTORS,
    ScaleSet,
    WarpResult,
    anaglyph,
    forward_warp,
    make_augmented_pair,
    masked_l1,
    max_disparity,
    mean_disparity,
    median_disparity,
    percentile_disparity,
)
from stereobench.quality import PatchPsnrConfig, clip_metric, patch_psnr, psnr, ssim
from stereobench.matching import (
    Keypoint,
    MatchabilityBreakdown,
    MatchSet,
    detect_keypoints,
    match_epipolar,
    matchability_error,
)
from stereobench.disparity import (
    AlignmentResult,
    DegenerateAlignmentError,
    DisparityErrorResult,
    SgmConfig,
    align_lsq,
    disparity_error,
    estimate_disparity,
)
from stereobench.flow import FlowConfig, FlowField, TemporalErrorResult, optical_flow, temporal_error
from stereobench.attention import (
    AttentionWeights,
    attention_memory_model,
    epipolar_attention,
    full_cross_attention_row_masked,
    guided_pyramid_stub,
    load_attention_weights,
    save_attention_weights,
)
from stereobench.harness import (
    DegradationSpec,
    DisparityProfile,
    MatchConfig,
    ProtocolRun,
    make_synthetic_scene,
    run_protocol,
    sensitivity_sweep,
    write_curves,
)

__version__ = "0.1.0"
