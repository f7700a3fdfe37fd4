import csv
import json

import numpy as np
import pytest

from stereobench.cli import main
from stereobench.attention import AttentionWeights, save_attention_weights
from stereobench.harness import DisparityProfile, make_synthetic_scene
from stereobench.media_io import load_clip, load_disparity, load_report, save_clip, save_disparity


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    assert main([
        "synth", "--seed", "7", "--width", "96", "--height", "64",
        "--frames", "2", "--profile", "two_plane:0,8", "--out", str(root),
    ]) == 0
    return root


def test_synth_outputs(scene_dir):
    left = load_clip(scene_dir / "left")
    right = load_clip(scene_dir / "right")
    assert left.frames.shape == (2, 64, 96, 3)
    assert right.frames.shape == (2, 64, 96, 3)
    d = load_disparity(scene_dir / "disp" / "000.pfm")
    assert d.valid.all()
    assert set(np.unique(d.values)) == {0.0, 8.0}
    meta = json.loads((scene_dir / "scene.json").read_text())
    assert meta["seed"] == 7


def test_synth_matches_api(scene_dir):
    clip, _ = make_synthetic_scene(7, 96, 64, 2, DisparityProfile("two_plane", (0, 8)))
    left = load_clip(scene_dir / "left")
    # 8-bit quantization on save
    assert np.abs(left.frames - clip.left.frames).max() <= 0.5 / 255.0


def test_convert_and_masks(scene_dir, tmp_path):
    out = tmp_path / "warped"
    masks = tmp_path / "masks"
    code = main([
        "convert", "--left", str(scene_dir / "left"), "--disparity", str(scene_dir / "disp"),
        "--scale", "0", "--out", str(out), "--mask-out", str(masks),
    ])
    assert code == 0
    warped = load_clip(out)
    original = load_clip(scene_dir / "left")
    np.testing.assert_array_equal(warped.frames, original.frames)
    mask = load_clip(masks)
    assert np.all(mask.frames == 1.0)


def test_augment_writes_scale_set(scene_dir, tmp_path):
    out = tmp_path / "aug"
    code = main([
        "augment", "--left", str(scene_dir / "left"), "--disparity", str(scene_dir / "disp"),
        "--scales", "0.5,2.0", "--out", str(out),
    ])
    assert code == 0
    meta = json.loads((out / "conditioning.json").read_text())
    assert meta["scaled"] == {"0.5": 0.0, "2": 0.0}
    assert load_clip(out / "scale_0.5").frames.shape == (2, 64, 96, 3)


def test_anaglyph_command(scene_dir, tmp_path):
    out = tmp_path / "ana"
    code = main([
        "anaglyph", "--left", str(scene_dir / "left"), "--right", str(scene_dir / "right"),
        "--out", str(out),
    ])
    assert code == 0
    ana = load_clip(out)
    left = load_clip(scene_dir / "left")
    right = load_clip(scene_dir / "right")
    np.testing.assert_array_equal(ana.frames[..., 0], left.frames[..., 0])
    np.testing.assert_array_equal(ana.frames[..., 1:], right.frames[..., 1:])


def test_metric_psnr_identity(scene_dir, capsys):
    code = main([
        "metric", "--metric", "psnr",
        "--a", str(scene_dir / "right"), "--b", str(scene_dir / "right"),
    ])
    assert code == 0
    assert "psnr: 100.000000" in capsys.readouterr().out


def test_metric_match_with_dump(scene_dir, tmp_path, capsys):
    dump = tmp_path / "matches.csv"
    code = main([
        "metric", "--metric", "match",
        "--a", str(scene_dir / "left"), "--b", str(scene_dir / "right"),
        "--gt", str(scene_dir / "right"), "--dump-matches", str(dump),
    ])
    assert code == 0
    assert "match_error: 0.000000" in capsys.readouterr().out
    with open(dump, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["frame", "u", "v", "status"]
    assert all(row[3] == "tp" for row in rows[1:])
    assert len(rows) > 10


def test_metric_temporal_with_flow_dump(scene_dir, tmp_path, capsys):
    dump = tmp_path / "flows"
    code = main([
        "metric", "--metric", "temporal",
        "--a", str(scene_dir / "right"), "--b", str(scene_dir / "right"),
        "--dump-flow", str(dump),
    ])
    assert code == 0
    assert "temporal: 0.000000" in capsys.readouterr().out
    du = load_disparity(dump / "a_000_du.pfm")
    dv = load_disparity(dump / "b_000_dv.pfm")
    assert du.values[du.valid].max() <= 1.0  # global 1 px pan
    assert np.all(dv.values[dv.valid] == 0.0)


def test_metric_match_requires_gt(scene_dir):
    code = main([
        "metric", "--metric", "match",
        "--a", str(scene_dir / "left"), "--b", str(scene_dir / "right"),
    ])
    assert code == 2


def test_disparity_command(scene_dir, tmp_path):
    out = tmp_path / "est"
    code = main([
        "disparity", "--left", str(scene_dir / "left"), "--right", str(scene_dir / "right"),
        "--out", str(out), "--dmin", "-4", "--dmax", "16",
    ])
    assert code == 0
    est = load_disparity(out / "000.pfm")
    gt = load_disparity(scene_dir / "disp" / "000.pfm")
    close = np.abs(est.values - gt.values)[est.valid] <= 1.0
    assert close.mean() >= 0.9


def test_evaluate_identity_report(scene_dir, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = main([
        "evaluate", "--left", str(scene_dir / "left"),
        "--right-gt", str(scene_dir / "right"), "--right-pred", str(scene_dir / "right"),
        "--gt-disp", str(scene_dir / "disp"), "--out", str(report_path),
        "--ppsnr-patch", "8", "--ppsnr-stride", "8", "--ppsnr-range", "16",
        "--sgm-dmin", "-4", "--sgm-dmax", "16", "--flow-levels", "2",
        "--delta", "0.0",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "psnr: 100.000000" in out
    report = load_report(report_path)
    assert report.psnr == 100.0
    assert report.ssim == 1.0
    assert report.match_error == 0.0
    assert report.temp_err == 0.0
    assert report.config["global_3d_info"] == {"median_disparity": 0.0}


def test_evaluate_failure_names_metric(scene_dir, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = main([
        "evaluate", "--left", str(scene_dir / "left"),
        "--right-gt", str(scene_dir / "right"), "--right-pred", str(scene_dir / "right"),
        "--out", str(report_path),
        "--ppsnr-patch", "8", "--ppsnr-stride", "8", "--ppsnr-range", "16",
        "--flow-levels", "2",
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert "disp_err" in err
    report = load_report(report_path)
    assert report.disp_err is None
    assert report.psnr == 100.0


def test_sensitivity_csv(scene_dir, tmp_path):
    out = tmp_path / "curves.csv"
    code = main([
        "sensitivity", "--left", str(scene_dir / "left"),
        "--right-gt", str(scene_dir / "right"), "--right-pred", str(scene_dir / "right"),
        "--kind", "shift", "--levels", "0,2,4", "--out", str(out),
        "--ppsnr-patch", "8", "--ppsnr-stride", "8", "--ppsnr-range", "16",
    ])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["level", "metric", "value"]
    assert len(rows) == 1 + 3 * 4


def test_attn_bench_epipolar(capsys):
    code = main(["attn-bench", "--h", "8", "--w", "8", "--c", "4", "--d", "4"])
    assert code == 0
    out = capsys.readouterr().out
    assert "memory[epipolar]: 1024 bytes" in out
    assert "memory[full]: 8192 bytes" in out
    assert "epipolar: 8x8x4" in out


def test_attn_bench_oracle_guard(capsys):
    code = main(["attn-bench", "--h", "512", "--w", "512", "--mode", "oracle"])
    assert code == 1
    assert "refuse" in capsys.readouterr().err


def test_attn_bench_with_weights_file(tmp_path, capsys):
    w = AttentionWeights.random(4, 4, seed=0)
    save_attention_weights(w, tmp_path / "w.bin")
    code = main([
        "attn-bench", "--h", "6", "--w", "6", "--c", "4", "--d", "4",
        "--mode", "oracle", "--weights", str(tmp_path / "w.bin"),
    ])
    assert code == 0
    assert "oracle: 6x6x4" in capsys.readouterr().out


def test_cli_error_exit_code(tmp_path):
    assert main(["convert", "--left", str(tmp_path / "missing"), "--disparity", str(tmp_path),
                 "--scale", "1", "--out", str(tmp_path / "o")]) == 1
