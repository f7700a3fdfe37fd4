import numpy as np
import pytest

from stereobench.disparity import SgmConfig
from stereobench.flow import FlowConfig
from stereobench.harness import (
    DegradationSpec,
    DisparityProfile,
    MatchConfig,
    ProtocolRun,
    degrade_frame,
    make_synthetic_scene,
    run_protocol,
    sensitivity_sweep,
    write_curves,
)
from stereobench.media_io import StereoClip, VideoClip, save_report
from stereobench.quality import PatchPsnrConfig
from stereobench.warp import forward_warp, median_disparity


def small_run(scene, candidate=None, gt_disp=True):
    clip, disps = scene
    return ProtocolRun(
        input=clip,
        candidate=candidate if candidate is not None else clip.right,
        gt_disparity=disps if gt_disp else None,
        global_3d_info={"median_disparity": median_disparity(disps[0])},
        ppsnr=PatchPsnrConfig(patch=8, stride=8, search_range=16),
        sgm=SgmConfig(d_min=-4, d_max=16),
        flow=FlowConfig(levels=2),
        match=MatchConfig(max_keypoints=256),
    )


class TestSyntheticScene:
    def test_constant_profile_is_translation(self):
        clip, disps = make_synthetic_scene(
            seed=3, width=64, height=48, n_frames=1,
            profile=DisparityProfile("constant", (4,)),
        )
        left = clip.left.frames[0]
        right = clip.right.frames[0]
        np.testing.assert_array_equal(right[:, : 64 - 4], left[:, 4:])
        assert disps[0].valid.all()
        assert np.all(disps[0].values == 4.0)

    def test_two_plane_bimodal_median_zero(self):
        clip, disps = make_synthetic_scene(
            seed=3, width=96, height=64, n_frames=1,
            profile=DisparityProfile("two_plane", (0, 8)),
        )
        values = np.unique(disps[0].values)
        np.testing.assert_array_equal(values, [0.0, 8.0])
        # background dominates (square covers 1/16 of the frame)
        assert median_disparity(disps[0]) == 0.0

    def test_right_view_is_filled_forward_warp(self):
        clip, disps = make_synthetic_scene(
            seed=5, width=96, height=64, n_frames=1,
            profile=DisparityProfile("two_plane", (0, 8)),
        )
        res = forward_warp(clip.left.frames[0], disps[0], 1.0)
        right = clip.right.frames[0]
        np.testing.assert_array_equal(right[res.valid], res.image[res.valid])
        assert np.all(np.isfinite(right))

    def test_determinism(self):
        a = make_synthetic_scene(11, 64, 48, 2, DisparityProfile("two_plane", (0, 6)))
        b = make_synthetic_scene(11, 64, 48, 2, DisparityProfile("two_plane", (0, 6)))
        np.testing.assert_array_equal(a[0].left.frames, b[0].left.frames)
        np.testing.assert_array_equal(a[0].right.frames, b[0].right.frames)

    def test_profile_parsing(self):
        p = DisparityProfile.parse("two_plane:0,8")
        assert p.kind == "two_plane" and p.values == (0.0, 8.0)
        assert DisparityProfile.parse("constant:4").values == (4.0,)
        with pytest.raises(ValueError):
            DisparityProfile.parse("wedge:1,2")
        with pytest.raises(ValueError):
            DisparityProfile.parse("constant:2.5")


class TestRunProtocol:
    def test_identity_candidate(self, small_scene):
        report = run_protocol(small_run(small_scene))
        assert report.errors == {}
        assert report.psnr == 100.0
        assert report.ssim == 1.0
        assert report.match_error == 0.0
        assert report.temp_err == 0.0
        assert report.disp_err is not None and report.disp_err <= 0.5
        assert report.p_psnr > 25.0

    def test_left_as_candidate_scores_worse(self, small_scene):
        clip, _ = small_scene
        good = run_protocol(small_run(small_scene))
        bad = run_protocol(small_run(small_scene, candidate=clip.left))
        assert bad.psnr < good.psnr
        # both videos share the global pan, so motion still agrees
        assert bad.temp_err == pytest.approx(0.0, abs=0.05)

    def test_warped_candidate_with_holes(self, small_scene):
        clip, disps = small_scene
        frames = []
        for t in range(len(clip.left)):
            frames.append(forward_warp(clip.left.frames[t], disps[t], 1.0).image)
        candidate = VideoClip(frames=np.stack(frames), fps=clip.left.fps)
        report = run_protocol(small_run(small_scene, candidate=candidate))
        for value in (report.psnr, report.ssim, report.p_psnr, report.temp_err):
            assert value is not None and np.isfinite(value)
        assert 0.0 <= report.match_error <= 1.0

    def test_missing_gt_disparity_noted(self, small_scene):
        report = run_protocol(small_run(small_scene, gt_disp=False))
        assert report.disp_err is None
        assert "disp_err" in report.errors
        assert report.psnr is not None

    def test_purity_byte_identical_reports(self, small_scene, tmp_path):
        r1 = run_protocol(small_run(small_scene))
        r2 = run_protocol(small_run(small_scene))
        save_report(r1, tmp_path / "a.json")
        save_report(r2, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_aggregates_match_per_frame_values(self, small_scene):
        clip, _ = small_scene
        noisy = np.clip(
            clip.right.frames + 0.05 * (np.random.default_rng(0).random(clip.right.frames.shape) - 0.5),
            0, 1,
        )
        report = run_protocol(small_run(small_scene, candidate=VideoClip(frames=noisy)))
        assert report.psnr == pytest.approx(
            10 * np.log10(1 / np.mean(report.per_frame["psnr_mse"])), abs=1e-12
        )
        assert report.ssim == pytest.approx(np.mean(report.per_frame["ssim"]), abs=1e-12)
        assert report.p_psnr == pytest.approx(
            10 * np.log10(1 / np.mean(report.per_frame["p_psnr_mse"])), abs=1e-12
        )
        counts = report.match_counts
        expected = (counts["fp"] + counts["fn"]) / (counts["tp"] + counts["fp"] + counts["fn"])
        assert report.match_error == pytest.approx(expected, abs=1e-15)
        assert counts["tp"] == sum(report.per_frame["match_tp"])
        kept = [m for m in report.per_frame["disp_err"] if m is not None]
        assert report.disp_err == pytest.approx(np.mean(kept), abs=1e-12)
        pair_sum = sum(
            m * n for m, n in zip(report.per_frame["temp_err"], report.per_frame["temp_err_pixels"])
        )
        assert report.temp_err == pytest.approx(
            pair_sum / sum(report.per_frame["temp_err_pixels"]), abs=1e-12
        )

    def test_shape_mismatch_rejected(self, small_scene, rng):
        clip, disps = small_scene
        with pytest.raises(ValueError):
            ProtocolRun(input=clip, candidate=VideoClip(frames=rng.random((2, 64, 64, 3))))


class TestSensitivity:
    def test_level_zero_matches_protocol(self, small_scene):
        run = small_run(small_scene)
        report = run_protocol(run)
        rows = sensitivity_sweep(run, DegradationSpec("horizontal_shift", (0,)))
        by_metric = {r["metric"]: r["value"] for r in rows}
        assert by_metric["psnr"] == report.psnr
        assert by_metric["ssim"] == report.ssim
        assert by_metric["p_psnr"] == report.p_psnr
        assert by_metric["match_error"] == report.match_error

    def test_blur_zero_is_identity(self, small_scene, rng):
        frame = rng.random((8, 8, 3))
        np.testing.assert_array_equal(degrade_frame(frame, "gaussian_blur", 0), frame)
        np.testing.assert_array_equal(degrade_frame(frame, "horizontal_shift", 0), frame)

    def test_shift_trends(self, small_scene):
        run = small_run(small_scene)
        rows = sensitivity_sweep(run, DegradationSpec("horizontal_shift", (0, 2, 5, 9)))
        psnr_curve = [r["value"] for r in rows if r["metric"] == "psnr"]
        ppsnr_curve = [r["value"] for r in rows if r["metric"] == "p_psnr"]
        match_curve = [r["value"] for r in rows if r["metric"] == "match_error"]
        assert all(a > b for a, b in zip(psnr_curve, psnr_curve[1:]))
        assert all(abs(v - ppsnr_curve[0]) <= 1.0 for v in ppsnr_curve)
        assert all(abs(v - match_curve[0]) <= 0.05 for v in match_curve)

    def test_blur_trends(self, small_scene):
        run = small_run(small_scene)
        rows = sensitivity_sweep(run, DegradationSpec("gaussian_blur", (0.0, 1.0, 4.0)))
        match_curve = [r["value"] for r in rows if r["metric"] == "match_error"]
        ssim_curve = [r["value"] for r in rows if r["metric"] == "ssim"]
        assert match_curve[-1] - match_curve[0] >= 0.2
        assert ssim_curve[0] > ssim_curve[-1]

    def test_shift_wider_than_frame_rejected(self, small_scene):
        run = small_run(small_scene)
        with pytest.raises(ValueError):
            sensitivity_sweep(run, DegradationSpec("horizontal_shift", (500,)))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            DegradationSpec("vertical_shift", (1,))
        with pytest.raises(ValueError):
            DegradationSpec("horizontal_shift", ())
        with pytest.raises(ValueError):
            DegradationSpec("horizontal_shift", (1.5,))

    def test_curve_csv_roundtrip(self, small_scene, tmp_path):
        import csv

        run = small_run(small_scene)
        rows = sensitivity_sweep(run, DegradationSpec("horizontal_shift", (0, 3)))
        write_curves(rows, tmp_path / "curves.csv")
        with open(tmp_path / "curves.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            parsed = [(row[0], row[1], float(row[2])) for row in reader]
        assert header == ["level", "metric", "value"]
        assert len(parsed) == len(rows)
        for (lvl, metric, value), row in zip(parsed, rows):
            assert metric == row["metric"]
            assert value == row["value"]
