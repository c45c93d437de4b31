"""Stereo verification of tentative detections (epipolar gating, NCC matching, rescue).

Images are float arrays in [0, 1] of shape (H, W, 3); uint8 input is
converted.  The fundamental matrix maps left pixels to right epipolar
lines: ``x_R^T F x_L = 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .detection import Detection
from .exceptions import InvalidInputError

log = logging.getLogger(__name__)

RANK_TOL = 1e-6
DEGENERATE_TOL = 1e-12
GATE_EPS = 1e-9  # relative slack on the closed distance bound
VARIANCE_EPS = 1e-12  # window variances below this (relative) are treated as zero
DIRECT_RATIO = 30  # direct sums when placements x template pixels <= this x region pixels

REASON_BORDER = "border"
REASON_LOW_NCC = "low_ncc"


def skew(t) -> np.ndarray:
    x, y, z = np.asarray(t, dtype=float).ravel()
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class VerificationConfig:
    theta_s1: float = 1.2
    theta_s2: float = 3.0
    theta_ncc: float = 0.95

    def __post_init__(self):
        if not (self.theta_s2 >= self.theta_s1 >= 1.0):
            raise InvalidInputError(
                f"need theta_s2 >= theta_s1 >= 1, got {self.theta_s1}, {self.theta_s2}")
        if not (0.0 < self.theta_ncc < 1.0):
            raise InvalidInputError(f"theta_ncc must lie in (0, 1), got {self.theta_ncc}")


@dataclass(frozen=True)
class StereoGeometry:
    F: np.ndarray
    left_size: tuple[int, int]  # (width, height)
    right_size: tuple[int, int]

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.shape != (3, 3) or not np.all(np.isfinite(F)):
            raise InvalidInputError("F must be a finite 3x3 matrix")
        s = np.linalg.svd(F, compute_uv=False)
        if s[0] > DEGENERATE_TOL and s[2] >= RANK_TOL * s[0]:
            raise InvalidInputError(f"F must have rank 2 (singular values {s})")
        object.__setattr__(self, "F", F)

    @property
    def degenerate(self) -> bool:
        return float(np.linalg.norm(self.F)) < DEGENERATE_TOL

    @classmethod
    def from_extrinsics(cls, K_left, K_right, R, t, left_size, right_size=None) -> "StereoGeometry":
        """F for ``X_R = R X_L + t`` (right-camera coordinates from left-camera coordinates)."""
        K_left = np.asarray(K_left, dtype=float)
        K_right = np.asarray(K_right, dtype=float)
        E = skew(t) @ np.asarray(R, dtype=float)
        F = np.linalg.inv(K_right).T @ E @ np.linalg.inv(K_left)
        n = np.linalg.norm(F)
        if n > 0:
            F = F / n
        return cls(F, tuple(left_size), tuple(right_size or left_size))

    @classmethod
    def rectified(cls, fx: float, cx: float, cy: float, baseline: float, size) -> "StereoGeometry":
        """Horizontal rig: right camera displaced by ``baseline`` along +X."""
        K = np.array([[fx, 0, cx], [0, fx, cy], [0, 0, 1.0]])
        return cls.from_extrinsics(K, K, np.eye(3), [-baseline, 0.0, 0.0], size)

    def transposed(self) -> "StereoGeometry":
        """Geometry with the roles of the two cameras swapped."""
        return StereoGeometry(self.F.T.copy(), self.right_size, self.left_size)

    def line_in_right(self, point) -> np.ndarray:
        return self.F @ np.array([point[0], point[1], 1.0])

    def line_in_left(self, point) -> np.ndarray:
        return self.F.T @ np.array([point[0], point[1], 1.0])


def point_line_distance(line, point) -> float:
    a, b, c = line
    n = math.hypot(a, b)
    if n == 0.0:
        return math.inf
    return abs(a * point[0] + b * point[1] + c) / n


@dataclass
class CandidateSet:
    indices: list[int]
    degenerate: bool = False


def epipolar_candidates(det: Detection, geom: StereoGeometry, others: Sequence[Detection],
                        from_left: bool = True) -> CandidateSet:
    """Detections in the other view whose centres lie within det's box diagonal of its epipolar line."""
    line = geom.line_in_right(det.center) if from_left else geom.line_in_left(det.center)
    if geom.degenerate or math.hypot(line[0], line[1]) < DEGENERATE_TOL:
        log.warning("degenerate epipolar geometry; all %d candidates kept", len(others))
        return CandidateSet(list(range(len(others))), degenerate=True)
    bound = det.diagonal * (1.0 + GATE_EPS)
    idx = [j for j, o in enumerate(others) if point_line_distance(line, o.center) <= bound]
    return CandidateSet(idx)


def as_float_image(img) -> np.ndarray:
    a = np.asarray(img)
    if a.dtype == np.uint8:
        a = a.astype(np.float64) / 255.0
    else:
        a = a.astype(np.float64, copy=False)
    if a.ndim == 2:
        a = a[..., None]
    if a.ndim != 3:
        raise InvalidInputError(f"expected an (H, W, C) image, got shape {a.shape}")
    return a


def planar(img) -> np.ndarray:
    """Channel-first contiguous float copy (C, H, W) of an (H, W, C) image."""
    return np.ascontiguousarray(np.moveaxis(as_float_image(img), 2, 0))


def _window_sums(x: np.ndarray, th: int, tw: int) -> np.ndarray:
    """Sums over every th x tw window (valid placements) of a (C, H, W) array."""
    c = np.zeros((x.shape[0], x.shape[1] + 1, x.shape[2] + 1))
    np.cumsum(x, axis=1, out=c[:, 1:, 1:])
    np.cumsum(c[:, 1:, 1:], axis=2, out=c[:, 1:, 1:])
    return c[:, th:, tw:] - c[:, :-th, tw:] - c[:, th:, :-tw] + c[:, :-th, :-tw]


def _valid_correlation(region: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Per-channel sum of region window times template, for every valid placement.

    Problems with few placements are summed directly; the rest use a
    circular FFT correlation at the region's size (placements where the
    template fits entirely inside the region never wrap around).  The
    switch compares the direct work with the region area, which sets the
    FFT cost.
    """
    th, tw = template.shape[1:]
    H, W = region.shape[1:]
    if (H - th + 1) * (W - tw + 1) * th * tw <= DIRECT_RATIO * H * W:
        win = np.lib.stride_tricks.sliding_window_view(region, (th, tw), axis=(1, 2))
        return np.einsum("cijkl,ckl->cij", win, template)
    shape = (sfft.next_fast_len(H, real=True), sfft.next_fast_len(W, real=True))
    fr = sfft.rfft2(region, s=shape)
    ft = sfft.rfft2(template, s=shape)
    full = sfft.irfft2(fr * np.conj(ft), s=shape)
    return full[:, :H - th + 1, :W - tw + 1]


def _ncc_planar(t: np.ndarray, s: np.ndarray) -> np.ndarray:
    C, th, tw = t.shape
    n = th * tw
    tm = t.reshape(C, -1)
    t0 = t - tm.mean(axis=1)[:, None, None]
    tnorm = np.sqrt(np.einsum("ij,ij->i", t0.reshape(C, -1), t0.reshape(C, -1)))
    t_ok = tnorm > VARIANCE_EPS * np.maximum(1.0, math.sqrt(n) * np.abs(tm).max(axis=1))
    r = s - s.reshape(C, -1).mean(axis=1)[:, None, None]  # centring helps the window sums
    num = _valid_correlation(r, t0)
    s1 = _window_sums(r, th, tw)
    s2 = _window_sums(r * r, th, tw)
    var = np.maximum(s2 - s1 * s1 / n, 0.0)
    ok = (var > VARIANCE_EPS * np.maximum(s2, 1e-300)) & t_ok[:, None, None]
    den = np.sqrt(np.where(ok, var, 1.0)) * np.where(t_ok, tnorm, 1.0)[:, None, None]
    per_channel = np.where(ok, np.clip(num / den, -1.0, 1.0), 0.0)
    return per_channel.mean(axis=0)


def ncc_map(template, region) -> np.ndarray:
    """Channel-averaged normalized cross-correlation over all valid placements.

    Output shape is ``(Hr - Ht + 1, Wr - Wt + 1)``; entry ``(r, c)`` scores the
    window whose top-left corner is at ``(r, c)``.  A channel whose template
    or window has zero variance contributes 0 for that window.
    """
    t = planar(template)
    s = planar(region)
    if t.shape[0] != s.shape[0]:
        raise InvalidInputError("template and region must have the same number of channels")
    if t.shape[1] > s.shape[1] or t.shape[2] > s.shape[2]:
        raise InvalidInputError(f"template {t.shape[1:]} larger than region {s.shape[1:]}")
    return _ncc_planar(t, s)


def _peak(m: np.ndarray) -> tuple[float, tuple[int, int]]:
    k = int(np.argmax(m))
    r, c = divmod(k, m.shape[1])
    return float(m[r, c]), (r, c)


def _check_strict(t_shape, s_shape):
    if not (t_shape[0] < s_shape[0] and t_shape[1] < s_shape[1]):
        raise InvalidInputError(
            f"template {tuple(t_shape)} must be strictly smaller than region {tuple(s_shape)}")


def ncc_match(template, region) -> tuple[float, tuple[int, int]]:
    """Peak of :func:`ncc_map` and its (row, col) location (top-left of the best window).

    The template must be strictly smaller than the region in both dimensions.
    """
    t = np.asarray(template)
    s = np.asarray(region)
    _check_strict(t.shape[:2], s.shape[:2])
    return _peak(ncc_map(t, s))


def crop(img: np.ndarray, box: tuple[int, int, int, int]) -> np.ndarray:
    """Crop an (H, W, C) image to ``box``, clipped to the image."""
    u, v, w, h = box
    H, W = img.shape[:2]
    return img[max(v, 0):min(v + h, H), max(u, 0):min(u + w, W)]


def _image(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 3:
        raise InvalidInputError(f"expected an (H, W, C) image, got shape {a.shape}")
    return a


def search_box(center, size, min_size, image_size) -> tuple[int, int, int, int]:
    """Box of ``size`` (at least ``min_size``) centred on ``center``, clipped to the image."""
    cx, cy = center
    w = max(int(math.ceil(size[0])), min_size[0])
    h = max(int(math.ceil(size[1])), min_size[1])
    u0 = int(math.floor(cx - w / 2.0))
    v0 = int(math.floor(cy - h / 2.0))
    W, H = image_size
    u1, v1 = min(u0 + w, W), min(v0 + h, H)
    u0, v0 = max(u0, 0), max(v0, 0)
    return (u0, v0, max(u1 - u0, 0), max(v1 - v0, 0))


def _search(det: Detection, own: np.ndarray, other: np.ndarray, center, size, min_margin: int):
    """NCC of det's crop from ``own`` inside a search box of ``other``.

    Returns (peak, absolute (row, col) of the best window, box) or None if
    the clipped search box is not strictly larger than the template.
    """
    tpl = crop(own, det.box)
    th, tw = tpl.shape[:2]
    H, W = other.shape[:2]
    box = search_box(center, size, (tw + min_margin, th + min_margin), (W, H))
    if th == 0 or tw == 0 or box[2] <= tw or box[3] <= th:
        return None
    peak, (r, c) = _peak(_ncc_planar(planar(tpl), planar(crop(other, box))))
    return peak, (box[1] + r, box[0] + c), box


def _directional_score(det: Detection, own: np.ndarray, other_det: Detection, other: np.ndarray,
                       scale: float) -> float:
    res = _search(det, own, other, other_det.center, (other_det.w * scale, other_det.h * scale), 2)
    return -math.inf if res is None else res[0]


@dataclass
class MatchResult:
    left_index: int
    right_index: int | None
    peak: float
    location: tuple[int, int] | None = None
    accepted: bool = False


@dataclass
class PairingResult:
    pairs: list[MatchResult]
    unmatched_left: list[int]
    unmatched_right: list[int]
    degenerate: bool = False


def verify_pair(left: Sequence[Detection], right: Sequence[Detection], img_left, img_right,
                geom: StereoGeometry, cfg: VerificationConfig = VerificationConfig()) -> PairingResult:
    """Match left and right detections (Alg. 2, step 2).

    A (left, right) pair is a candidate when either centre lies near the
    other's epipolar line.  Its score is the larger of the two directional
    NCC peaks, each computed with the template cropped from one view and
    the search region (the partner's box enlarged by theta_s1) from the
    other.  Candidates at or above theta_ncc are assigned greedily by
    descending score, one partner per detection.
    """
    return _pair_images(left, right, _image(img_left), _image(img_right), geom, cfg)


def _pair_images(left, right, L, R, geom, cfg) -> PairingResult:
    degenerate = False
    edges: set[tuple[int, int]] = set()
    for i, d in enumerate(left):
        cs = epipolar_candidates(d, geom, right, from_left=True)
        degenerate |= cs.degenerate
        edges.update((i, j) for j in cs.indices)
    for j, d in enumerate(right):
        cs = epipolar_candidates(d, geom, left, from_left=False)
        degenerate |= cs.degenerate
        edges.update((i, j) for i in cs.indices)

    scored = []
    for i, j in sorted(edges):
        s_lr = _directional_score(left[i], L, right[j], R, cfg.theta_s1)
        s_rl = _directional_score(right[j], R, left[i], L, cfg.theta_s1)
        score = max(s_lr, s_rl)
        if score >= cfg.theta_ncc:
            scored.append((score, i, j))
    scored.sort(key=lambda x: (-x[0], x[1], x[2]))

    used_l, used_r, pairs = set(), set(), []
    for score, i, j in scored:
        if i in used_l or j in used_r:
            continue
        used_l.add(i)
        used_r.add(j)
        pairs.append(MatchResult(i, j, score, None, True))
    return PairingResult(
        pairs,
        [i for i in range(len(left)) if i not in used_l],
        [j for j in range(len(right)) if j not in used_r],
        degenerate,
    )


@dataclass
class RescueOutcome:
    detection: Detection
    peak: float
    location: tuple[int, int] | None
    accepted: bool
    reason: str | None = None


def _rescue_image(det: Detection, own: np.ndarray, opp: np.ndarray,
                   cfg: VerificationConfig) -> RescueOutcome:
    res = _search(det, own, opp, det.center, (det.w * cfg.theta_s2, det.h * cfg.theta_s2), 0)
    if res is None:
        return RescueOutcome(det, -math.inf, None, False, REASON_BORDER)
    peak, loc, _ = res
    if peak >= cfg.theta_ncc:
        return RescueOutcome(det, peak, loc, True)
    return RescueOutcome(det, peak, loc, False, REASON_LOW_NCC)


def rescue_one(det: Detection, own_image, opposite_image,
               cfg: VerificationConfig = VerificationConfig()) -> RescueOutcome:
    """Search the opposite view around the same coordinates with a theta_s2-enlarged region."""
    return _rescue_image(det, _image(own_image), _image(opposite_image), cfg)


def rescue_unmatched(unmatched: Sequence[Detection], own_image, opposite_image,
                     cfg: VerificationConfig = VerificationConfig()) -> list[RescueOutcome]:
    """Alg. 2 step 3: keep an unmatched detection only if the opposite view confirms it.

    Rejected detections carry reason ``"border"`` when the clipped search
    region is not larger than the template, else ``"low_ncc"``.
    """
    own, opp = _image(own_image), _image(opposite_image)
    return [_rescue_image(d, own, opp, cfg) for d in unmatched]


@dataclass(frozen=True)
class VerifiedDetection:
    detection: Detection
    camera: str
    ncc_peak: float
    pair_id: int | None = None
    rescued: bool = False

    def to_dict(self) -> dict:
        return {
            "box": list(self.detection.box),
            "camera": self.camera,
            "pair_id": self.pair_id,
            "ncc_peak": round(float(self.ncc_peak), 6),
            "rescued": self.rescued,
        }


@dataclass
class StereoResult:
    left: list[VerifiedDetection] = field(default_factory=list)
    right: list[VerifiedDetection] = field(default_factory=list)
    discarded: list[tuple[str, RescueOutcome]] = field(default_factory=list)
    degenerate: bool = False

    @property
    def verified(self) -> list[VerifiedDetection]:
        return self.left + self.right

    @property
    def n_pairs(self) -> int:
        return len({v.pair_id for v in self.verified if v.pair_id is not None})


def verify_stereo(left: Sequence[Detection], right: Sequence[Detection], img_left, img_right,
                  geom: StereoGeometry, cfg: VerificationConfig = VerificationConfig()) -> StereoResult:
    """Alg. 2 steps 2-3: pair detections, then revisit the unmatched ones in the opposite view."""
    L = _image(img_left)
    R = _image(img_right)
    pr = _pair_images(left, right, L, R, geom, cfg)
    out = StereoResult(degenerate=pr.degenerate)
    for pid, m in enumerate(pr.pairs):
        out.left.append(VerifiedDetection(left[m.left_index], "left", m.peak, pid))
        out.right.append(VerifiedDetection(right[m.right_index], "right", m.peak, pid))
    for cam, dets, idx, own, opp, dest in (("left", left, pr.unmatched_left, L, R, out.left),
                                          ("right", right, pr.unmatched_right, R, L, out.right)):
        for res in (_rescue_image(dets[i], own, opp, cfg) for i in idx):
            if res.accepted:
                dest.append(VerifiedDetection(res.detection, cam, res.peak, None, True))
            else:
                out.discarded.append((cam, res))
    return out
