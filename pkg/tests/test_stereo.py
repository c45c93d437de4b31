import math

import numpy as np
import pytest
from helpers import brute_ncc

from marineseg.detection import Detection
from marineseg.exceptions import InvalidInputError
from marineseg.stereo import (
    REASON_BORDER,
    REASON_LOW_NCC,
    StereoGeometry,
    VerificationConfig,
    epipolar_candidates,
    ncc_map,
    ncc_match,
    point_line_distance,
    rescue_one,
    rescue_unmatched,
    verify_pair,
    verify_stereo,
)

W, H = 160, 120


def texture(rng, h, w, smooth=True):
    x = rng.uniform(size=(h, w, 3))
    if smooth:
        from scipy.ndimage import gaussian_filter
        x = gaussian_filter(x, (1.0, 1.0, 0))
        x = (x - x.min()) / (x.max() - x.min())
    return x


def stereo_pair(rng, objects, disparity=12, phantoms=()):
    """Textured background shared by both views plus patches shifted by ``disparity``."""
    bg = texture(rng, H, W + disparity) * 0.3 + 0.3
    left = bg[:, disparity:].copy()
    right = bg[:, :W].copy()
    dl, dr = [], []
    for (u, v, w, h) in objects:
        patch = texture(rng, h, w)
        left[v:v + h, u:u + w] = patch
        right[v:v + h, u - disparity:u - disparity + w] = patch
        dl.append(Detection(u, v, w, h, w * h))
        dr.append(Detection(u - disparity, v, w, h, w * h))
    for (u, v, w, h) in phantoms:
        left[v:v + h, u:u + w] = 1.0 - 0.5 * texture(rng, h, w)
        dl.append(Detection(u, v, w, h, w * h))
    return left, right, dl, dr


GEOM = StereoGeometry.rectified(200.0, W / 2, H / 2, 0.3, (W, H))


# -- NCC -----------------------------------------------------------------------

def test_ncc_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        th, tw = rng.integers(2, 10, size=2)
        sh, sw = th + rng.integers(0, 22), tw + rng.integers(0, 22)
        s = rng.uniform(size=(sh, sw, 3))
        if rng.uniform() < 0.2:
            s[..., 1] = 0.5  # flat channel
        t = rng.uniform(size=(th, tw, 3))
        assert np.allclose(ncc_map(t, s), brute_ncc(t, s), atol=1e-10)


def test_ncc_large_region_fft_path():
    rng = np.random.default_rng(1)
    s = rng.uniform(size=(120, 140, 3))
    t = s[40:70, 50:90].copy()
    m = ncc_map(t, s)
    assert m.shape == (91, 101)
    peak, loc = ncc_match(t, s)
    assert loc == (40, 50) and abs(peak - 1) < 1e-9
    sub = (slice(30, 45), slice(45, 60))
    assert np.allclose(m[sub], brute_ncc(t, s[30:74, 45:99]), atol=1e-9)


def test_ncc_exact_copy_and_negative():
    rng = np.random.default_rng(2)
    s = rng.uniform(size=(31, 31, 3))
    t = s[10:19, 5:14].copy()
    peak, loc = ncc_match(t, s)
    assert loc == (10, 5) and abs(peak - 1) < 1e-12
    m = ncc_map(1.0 - t, s)
    assert abs(m[10, 5] + 1) < 1e-12


def test_ncc_zero_variance_scores_zero():
    t = np.full((5, 5, 3), 0.4)
    s = np.random.default_rng(3).uniform(size=(12, 12, 3))
    assert np.all(ncc_map(t, s) == 0)
    t2 = np.random.default_rng(4).uniform(size=(5, 5, 3))
    assert np.all(ncc_map(t2, np.full((12, 12, 3), 0.7)) == 0)


def test_ncc_match_requires_strictly_smaller_template():
    a = np.zeros((9, 9, 3))
    with pytest.raises(InvalidInputError):
        ncc_match(a, np.zeros((9, 20, 3)))
    with pytest.raises(InvalidInputError):
        ncc_map(np.zeros((10, 2, 3)), a)


def test_ncc_accepts_uint8():
    rng = np.random.default_rng(5)
    s = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
    t = s[3:8, 4:9]
    assert np.allclose(ncc_map(t, s), ncc_map(t / 255.0, s / 255.0), atol=1e-12)


# -- epipolar gating -------------------------------------------------------------

def test_rectified_gate_keeps_same_row():
    d = Detection(60, 50, 10, 10)
    others = [Detection(20, 50, 10, 10), Detection(20, 80, 10, 10)]
    assert epipolar_candidates(d, GEOM, others).indices == [0]


def test_gate_boundary_is_inclusive_at_the_diagonal():
    d = Detection(60, 50, 3, 4)  # diagonal 5, centre row 52
    others = [Detection(10, 55, 2, 4), Detection(10, 55, 2, 5)]  # centre rows 57, 57.5
    assert epipolar_candidates(d, GEOM, others).indices == [0]


def random_geometry(rng):
    K = np.array([[rng.uniform(300, 800), 0, W / 2], [0, rng.uniform(300, 800), H / 2], [0, 0, 1]])
    ang = rng.normal(0, 0.05, 3)
    from marineseg.geometry import rot_x, rot_y, rot_z
    R = rot_x(ang[0]) @ rot_y(ang[1]) @ rot_z(ang[2])
    t = rng.normal(0, 1, 3)
    return StereoGeometry.from_extrinsics(K, K, R, t, (W, H)), K, R, t


def test_gate_matches_point_line_oracle():
    rng = np.random.default_rng(6)
    for _ in range(200):
        geom, K, R, t = random_geometry(rng)
        d = Detection(int(rng.integers(0, 140)), int(rng.integers(0, 100)),
                      int(rng.integers(2, 20)), int(rng.integers(2, 20)))
        others = [Detection(int(rng.integers(0, 150)), int(rng.integers(0, 110)), 4, 4)
                  for _ in range(8)]
        E = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]]) @ R
        F = np.linalg.inv(K).T @ E @ np.linalg.inv(K)
        line = F @ np.array([*d.center, 1.0])
        want = [j for j, o in enumerate(others)
                if abs(line @ np.array([*o.center, 1.0])) / math.hypot(*line[:2])
                <= d.diagonal * (1 + 1e-9)]
        assert epipolar_candidates(d, geom, others).indices == want


def test_true_correspondences_lie_on_epipolar_lines():
    rng = np.random.default_rng(7)
    geom, K, R, t = random_geometry(rng)
    for _ in range(50):
        X = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(4, 20)])
        xl = K @ X
        xr = K @ (R @ X + t)
        pl, pr = xl[:2] / xl[2], xr[:2] / xr[2]
        assert point_line_distance(geom.line_in_right(pl), pr) < 1e-6
        assert point_line_distance(geom.line_in_left(pr), pl) < 1e-6


def test_zero_f_is_degenerate_and_keeps_everything():
    geom = StereoGeometry(np.zeros((3, 3)), (W, H), (W, H))
    cs = epipolar_candidates(Detection(0, 0, 2, 2), geom, [Detection(100, 100, 2, 2)] * 3)
    assert cs.degenerate and cs.indices == [0, 1, 2]


def test_full_rank_f_rejected():
    with pytest.raises(InvalidInputError):
        StereoGeometry(np.eye(3), (W, H), (W, H))


def test_config_validation():
    with pytest.raises(InvalidInputError):
        VerificationConfig(theta_s1=2.0, theta_s2=1.5)
    with pytest.raises(InvalidInputError):
        VerificationConfig(theta_ncc=1.0)


# -- pairing ----------------------------------------------------------------------

def test_object_with_disparity_is_paired():
    rng = np.random.default_rng(8)
    L, R, dl, dr = stereo_pair(rng, [(70, 60, 16, 12)])
    res = verify_pair(dl, dr, L, R, GEOM)
    assert len(res.pairs) == 1
    assert (res.pairs[0].left_index, res.pairs[0].right_index) == (0, 0)
    assert res.pairs[0].peak >= 0.99


def test_left_only_object_stays_unmatched():
    rng = np.random.default_rng(9)
    L, R, dl, dr = stereo_pair(rng, [(70, 60, 16, 12)], phantoms=[(110, 90, 10, 8)])
    res = verify_pair(dl, dr, L, R, GEOM)
    assert res.unmatched_left == [1] and res.unmatched_right == []


def test_two_objects_on_one_row_pair_correctly():
    rng = np.random.default_rng(10)
    L, R, dl, dr = stereo_pair(rng, [(40, 60, 14, 12), (100, 62, 14, 12)])
    res = verify_pair(dl, dr, L, R, GEOM)
    assert sorted((m.left_index, m.right_index) for m in res.pairs) == [(0, 0), (1, 1)]
    # greedy assignment = highest-scoring candidate first, never reusing a detection
    assert len({m.left_index for m in res.pairs}) == len(res.pairs)


def test_pairing_symmetric_under_view_swap():
    rng = np.random.default_rng(11)
    L, R, dl, dr = stereo_pair(rng, [(40, 60, 14, 12), (100, 30, 12, 10)],
                               phantoms=[(120, 95, 8, 8)])
    fwd = verify_pair(dl, dr, L, R, GEOM)
    bwd = verify_pair(dr, dl, R, L, GEOM.transposed())
    assert sorted((m.left_index, m.right_index, m.peak) for m in fwd.pairs) == \
        sorted((m.right_index, m.left_index, m.peak) for m in bwd.pairs)
    assert fwd.unmatched_left == bwd.unmatched_right


def test_stricter_threshold_never_adds_pairs():
    rng = np.random.default_rng(12)
    L, R, dl, dr = stereo_pair(rng, [(40, 60, 14, 12), (100, 30, 12, 10)])
    R = np.clip(R + rng.normal(0, 0.08, R.shape), 0, 1)
    counts = [len(verify_pair(dl, dr, L, R, GEOM, VerificationConfig(theta_ncc=t)).pairs)
              for t in (0.5, 0.7, 0.8, 0.9, 0.95, 0.99)]
    assert counts == sorted(counts, reverse=True)


# -- rescue -------------------------------------------------------------------------

def test_rescue_accepts_real_object_missed_in_other_view():
    rng = np.random.default_rng(13)
    L, R, dl, _ = stereo_pair(rng, [(70, 60, 16, 12)])
    out = rescue_one(dl[0], L, R)
    assert out.accepted and out.peak >= 0.95 and out.reason is None
    assert out.location == (60, 58)


def test_rescue_discards_glitter_phantom():
    rng = np.random.default_rng(14)
    L, R, dl, _ = stereo_pair(rng, [], phantoms=[(80, 70, 8, 8)])
    out = rescue_one(dl[0], L, R)
    assert not out.accepted and out.reason == REASON_LOW_NCC


def test_rescue_at_image_corner_reports_border():
    img = np.random.default_rng(15).uniform(size=(H, W, 3))
    out = rescue_unmatched([Detection(0, 0, W, 10)], img, img)
    assert out[0].reason == REASON_BORDER and out[0].location is None


def test_verify_stereo_suppresses_phantoms():
    rng = np.random.default_rng(16)
    removed = total = kept = n_obj = 0
    for _ in range(10):
        phantoms = [(int(rng.integers(20, 140)), int(rng.integers(75, 110)), 6, 6)
                    for _ in range(3)]
        L, R, dl, dr = stereo_pair(rng, [(60, 40, 16, 12)], phantoms=phantoms)
        res = verify_stereo(dl, dr, L, R, GEOM)
        boxes = {v.detection.box for v in res.left}
        kept += dl[0].box in boxes
        n_obj += 1
        removed += sum(d.box not in boxes for d in dl[1:])
        total += len(dl) - 1
    assert removed >= 0.9 * total and kept == n_obj


def test_verify_stereo_pair_ids_and_dicts():
    rng = np.random.default_rng(17)
    L, R, dl, dr = stereo_pair(rng, [(40, 60, 14, 12), (100, 30, 12, 10)])
    res = verify_stereo(dl, dr, L, R, GEOM)
    assert res.n_pairs == 2
    d = res.left[0].to_dict()
    assert set(d) == {"box", "camera", "pair_id", "ncc_peak", "rescued"}
