"""Sea-edge and detection metrics: per-frame scores and sequence reports."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidInputError

log = logging.getLogger(__name__)

DEFAULT_IOU = 0.3

Box = Sequence[float]  # [u, v, w, h]


def iou(a: Box, b: Box) -> float:
    ax1, ay1 = a[0] + a[2], a[1] + a[3]
    bx1, by1 = b[0] + b[2], b[1] + b[3]
    iw = max(0.0, min(ax1, bx1) - max(a[0], b[0]))
    ih = max(0.0, min(ay1, by1) - max(a[1], b[1]))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


@dataclass
class MatchCounts:
    tp: int
    fp: int
    fn: int
    pairs: list[tuple[int, int]] = field(default_factory=list)


def match_detections(pred: Sequence[Box], gt: Sequence[Box],
                     threshold: float = DEFAULT_IOU) -> MatchCounts:
    """Greedy one-to-one matching by descending IoU; pairs at or above ``threshold`` are TPs."""
    cand = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            o = iou(p, g)
            if o >= threshold and o > 0:
                cand.append((o, i, j))
    cand.sort(key=lambda x: (-x[0], x[1], x[2]))
    used_p, used_g, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((i, j))
    tp = len(pairs)
    return MatchCounts(tp, len(pred) - tp, len(gt) - tp, pairs)


def resample_polyline(points: Sequence[Sequence[float]], width: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-column rows of a [[col, row], ...] polyline; columns outside its span are invalid."""
    rows = np.zeros(width)
    valid = np.zeros(width, dtype=bool)
    if len(points) == 0:
        return rows, valid
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    p = p[np.argsort(p[:, 0], kind="stable")]
    cols = np.arange(width, dtype=float)
    valid = (cols >= p[0, 0]) & (cols <= p[-1, 0])
    if len(p) == 1:
        rows[valid] = p[0, 1]
    else:
        rows = np.interp(cols, p[:, 0], p[:, 1])
    return np.where(valid, rows, 0.0), valid


def edge_error(pred_rows: np.ndarray, pred_valid: np.ndarray, gt_rows: np.ndarray,
               gt_valid: np.ndarray, height: int) -> float | None:
    """RMSE of per-column row differences over mutually valid columns, divided by ``height``.

    Returns None when no column is valid in both.
    """
    if height <= 0:
        raise InvalidInputError("height must be positive")
    pr, gr = np.asarray(pred_rows, float), np.asarray(gt_rows, float)
    if pr.shape != gr.shape:
        raise InvalidInputError(f"edge widths differ: {pr.shape} vs {gr.shape}")
    both = np.asarray(pred_valid, bool) & np.asarray(gt_valid, bool)
    if not both.any():
        return None
    d = pr[both] - gr[both]
    return float(math.sqrt(float(np.mean(d * d))) / height)


@dataclass
class FrameScore:
    frame: int
    edge_rmse: float | None
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise InvalidInputError("counts must be non-negative")
        if self.edge_rmse is not None and not self.edge_rmse >= 0:
            raise InvalidInputError("edge RMSE must be non-negative")


def f_score(tp: int, fp: int, fn: int) -> float:
    """F = 2TP / (2TP + FP + FN); 0 when there is nothing to score."""
    den = 2 * tp + fp + fn
    return 2 * tp / den if den > 0 else 0.0


@dataclass
class SequenceReport:
    name: str
    mu_edg: float | None
    sigma_edg: float | None
    tp: int
    fp: int
    fn: int
    f_score: float
    alpha_fp: float
    n_frames: int
    n_edge_frames: int

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(scores: Sequence[FrameScore], name: str = "") -> SequenceReport:
    """Sequence totals; frames without a defined edge error are left out of mu/sigma only."""
    if not scores:
        raise InvalidInputError("cannot aggregate an empty score list")
    edges = [s.edge_rmse for s in scores if s.edge_rmse is not None]
    if len(edges) < len(scores):
        log.info("%d frame(s) without mutually valid edge columns excluded from mu_edg",
                 len(scores) - len(edges))
    tp = sum(s.tp for s in scores)
    fp = sum(s.fp for s in scores)
    fn = sum(s.fn for s in scores)
    mu = float(np.mean(edges)) if edges else None
    sd = float(np.std(edges)) if edges else None
    return SequenceReport(name, mu, sd, tp, fp, fn, f_score(tp, fp, fn), fp / len(scores),
                          len(scores), len(edges))


def merge_reports(reports: Iterable[SequenceReport], name: str = "all") -> SequenceReport:
    """Combine sequences, weighting every frame equally."""
    reports = list(reports)
    if not reports:
        raise InvalidInputError("no reports to merge")
    n = sum(r.n_frames for r in reports)
    ne = sum(r.n_edge_frames for r in reports)
    tp, fp, fn = (sum(getattr(r, k) for r in reports) for k in ("tp", "fp", "fn"))
    mu = sd = None
    if ne:
        mu = sum(r.mu_edg * r.n_edge_frames for r in reports if r.n_edge_frames) / ne
        second = sum((r.sigma_edg ** 2 + r.mu_edg ** 2) * r.n_edge_frames
                     for r in reports if r.n_edge_frames) / ne
        sd = math.sqrt(max(second - mu * mu, 0.0))
    return SequenceReport(name, mu, sd, tp, fp, fn, f_score(tp, fp, fn), fp / n, n, ne)


def score_frame(frame: int, pred_boxes: Sequence[Box], gt_boxes: Sequence[Box],
                pred_edge: tuple[np.ndarray, np.ndarray] | None,
                gt_edge: Sequence[Sequence[float]] | None, width: int, height: int,
                threshold: float = DEFAULT_IOU) -> FrameScore:
    m = match_detections(pred_boxes, gt_boxes, threshold)
    err = None
    if pred_edge is not None and gt_edge is not None:
        g_rows, g_valid = resample_polyline(gt_edge, width)
        err = edge_error(pred_edge[0], pred_edge[1], g_rows, g_valid, height)
    return FrameScore(frame, err, m.tp, m.fp, m.fn)


TABLE_COLUMNS = ("method", "mu_edg", "sigma_edg", "TP", "FP", "FN", "F-score", "alphaFP")


def _fmt(x: float | None, digits: int = 3) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def reports_csv(reports: Sequence[SequenceReport]) -> str:
    """CSV with the columns of the usual results table (edge error, counts, F, alphaFP)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in reports:
        w.writerow([r.name, _fmt(r.mu_edg), _fmt(r.sigma_edg), r.tp, r.fp, r.fn,
                    _fmt(r.f_score), _fmt(r.alpha_fp)])
    return buf.getvalue()
