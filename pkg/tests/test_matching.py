from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stereobench.imgproc import gaussian_blur, shift_horizontal, to_gray
from stereobench.matching import (
    HARRIS_K,
    MatchSet,
    detect_keypoints,
    harris_response,
    match_epipolar,
    match_status_rows,
    matchability_error,
)


def _texture(rng, h, w):
    img = np.empty((h, w, 3))
    for c in range(3):
        img[..., c] = np.clip(0.5 + 0.4 * (rng.random((h, w)) - 0.5) * 2, 0, 1)
    return img


def harris_loop_oracle(gray, k=HARRIS_K, sigma=1.0):
    """Plain-loop Harris: explicit Sobel convolution and Gaussian window."""
    h, w = gray.shape
    pad = np.pad(gray, 1, mode="edge")
    ix = np.zeros((h, w))
    iy = np.zeros((h, w))
    sob_d = np.array([-1.0, 0.0, 1.0])
    sob_s = np.array([1.0, 2.0, 1.0])
    for y in range(h):
        for x in range(w):
            win = pad[y : y + 3, x : x + 3]
            ix[y, x] = (sob_s[:, None] * sob_d[None, :] * win).sum()
            iy[y, x] = (sob_d[:, None] * sob_s[None, :] * win).sum()
    r = int(3.0 * sigma + 0.5)
    xs = np.arange(-r, r + 1)
    g1 = np.exp(-(xs**2) / (2 * sigma**2))
    g1 /= g1.sum()
    g2 = np.outer(g1, g1)
    resp = np.zeros((h, w))
    for name, arr in (("xx", ix * ix), ("yy", iy * iy), ("xy", ix * iy)):
        padded = np.pad(arr, r, mode="edge")
        sm = np.zeros((h, w))
        for y in range(h):
            for x in range(w):
                sm[y, x] = (g2 * padded[y : y + 2 * r + 1, x : x + 2 * r + 1]).sum()
        if name == "xx":
            sxx = sm
        elif name == "yy":
            syy = sm
        else:
            sxy = sm
    return sxx * syy - sxy**2 - k * (sxx + syy) ** 2


class TestDetector:
    def test_constant_image_yields_nothing(self):
        assert detect_keypoints(np.full((48, 48, 3), 0.3)) == []

    def test_response_matches_loop_oracle(self, rng):
        img = _texture(rng, 14, 15)
        gray = to_gray(img)
        ours = harris_response(gray)
        oracle = harris_loop_oracle(gray)
        np.testing.assert_allclose(ours, oracle, atol=1e-10)

    def test_single_bright_pixel_concentrates_keypoints(self):
        img = np.zeros((48, 48, 3))
        img[24, 24] = 1.0
        gray = to_gray(img)
        oracle = harris_loop_oracle(gray)
        ov, ou = np.unravel_index(np.argmax(oracle), oracle.shape)
        assert max(abs(ov - 24), abs(ou - 24)) <= 2
        kps = detect_keypoints(img)
        assert kps
        assert all(max(abs(kp.v - 24), abs(kp.u - 24)) <= 2 for kp in kps)

    def test_checkerboard_one_keypoint_per_interior_corner(self):
        cell = 8
        tiles = np.indices((8, 8)).sum(axis=0) % 2
        board = np.kron(tiles, np.ones((cell, cell)))
        img = np.repeat(board[:, :, None], 3, axis=2)
        kps = detect_keypoints(img, max_count=1000, nms_radius=3)
        # interior lattice points excluding the descriptor border
        corners = [
            (u * cell, v * cell)
            for v in range(2, 6 + 1)
            for u in range(2, 6 + 1)
        ]
        assert len(kps) == len(corners)
        for u0, v0 in corners:
            near = [kp for kp in kps if abs(kp.u - u0) <= 1 and abs(kp.v - v0) <= 1]
            assert len(near) == 1

    def test_ordering_and_count_limit(self, rng):
        img = _texture(rng, 64, 64)
        kps = detect_keypoints(img, max_count=10)
        assert len(kps) == 10
        scores = [kp.score for kp in kps]
        assert scores == sorted(scores, reverse=True)


class TestMatchEpipolar:
    def test_identity_matches_all_keypoints(self, rng):
        img = _texture(rng, 96, 128)
        kps = detect_keypoints(img)
        assert len(kps) > 20
        matched = match_epipolar(kps, img, img)
        assert len(matched) / len(kps) >= 0.99

    def test_shift_within_dmax_is_stable(self, rng):
        img = _texture(rng, 96, 256)
        kps = detect_keypoints(img)
        base = match_epipolar(kps, img, img)
        shifted = match_epipolar(kps, img, shift_horizontal(img, 6))
        sym_diff = len(base.members ^ shifted.members)
        assert sym_diff / max(len(base), 1) <= 0.05

    def test_heavy_blur_shrinks_match_set(self, rng):
        img = _texture(rng, 96, 128)
        kps = detect_keypoints(img)
        base = match_epipolar(kps, img, img)
        blurred = match_epipolar(kps, img, gaussian_blur(img, 4.0))
        assert len(blurred) < 0.5 * len(base)

    def test_determinism(self, rng):
        img = _texture(rng, 64, 96)
        other = _texture(rng, 64, 96)
        kps = detect_keypoints(img)
        a = match_epipolar(kps, img, other)
        b = match_epipolar(kps, img, other)
        assert a.members == b.members
        assert sorted(a.members) == sorted(b.members)

    def test_shape_mismatch(self, rng):
        img = _texture(rng, 32, 32)
        with pytest.raises(ValueError):
            match_epipolar([], img, _texture(rng, 32, 33))


class TestMatchabilityError:
    def test_identical_sets(self):
        m = MatchSet(members=frozenset({(1, 2), (3, 4)}))
        b = matchability_error(m, m)
        assert b.error == 0.0 and b.n_fp == 0 and b.n_fn == 0 and b.n_tp == 2
        assert not b.degenerate

    def test_disjoint_sets(self):
        a = MatchSet(members=frozenset({(1, 1)}))
        b = MatchSet(members=frozenset({(2, 2), (3, 3)}))
        assert matchability_error(a, b).error == 1.0

    def test_documented_decomposition(self):
        gt = MatchSet(members=frozenset({(0, 0), (1, 1), (2, 2), (5, 5), (6, 6)}))
        pred = MatchSet(members=frozenset({(0, 0), (1, 1), (2, 2), (9, 9)}))
        b = matchability_error(gt, pred)
        assert (b.n_tp, b.n_fp, b.n_fn) == (3, 1, 2)
        assert b.error == 0.5

    def test_both_empty_degenerate(self):
        b = matchability_error(MatchSet(frozenset()), MatchSet(frozenset()))
        assert b.error == 0.0 and b.degenerate

    @given(
        st.sets(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=40),
        st.sets(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=40),
    )
    def test_jaccard_complement_identity(self, a, b):
        gt, pred = MatchSet(frozenset(a)), MatchSet(frozenset(b))
        res = matchability_error(gt, pred)
        union = len(a | b)
        if union == 0:
            assert res.degenerate
            return
        jaccard_complement = Fraction(1) - Fraction(len(a & b), union)
        assert Fraction(res.n_fp + res.n_fn, res.n_tp + res.n_fp + res.n_fn) == jaccard_complement
        assert res.error == pytest.approx(float(jaccard_complement), abs=1e-15)
        assert 0.0 <= res.error <= 1.0

    @given(
        st.sets(st.tuples(st.integers(0, 20), st.integers(0, 20)), max_size=30),
        st.sets(st.tuples(st.integers(0, 20), st.integers(0, 20)), max_size=30),
    )
    def test_symmetry_swaps_fp_fn(self, a, b):
        gt, pred = MatchSet(frozenset(a)), MatchSet(frozenset(b))
        fwd = matchability_error(gt, pred)
        rev = matchability_error(pred, gt)
        assert fwd.error == rev.error
        assert (fwd.n_fp, fwd.n_fn) == (rev.n_fn, rev.n_fp)


def test_match_status_rows():
    gt = MatchSet(members=frozenset({(1, 1), (2, 2)}))
    pred = MatchSet(members=frozenset({(2, 2), (3, 3)}))
    rows = match_status_rows(gt, pred)
    assert rows == [(1, 1, "fn"), (2, 2, "tp"), (3, 3, "fp")]
