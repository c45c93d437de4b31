"""Scoring detections: water-edge error, TP/FP/FN, F-score and alphaFP.

Edge error is the RMSE between predicted and annotated water edges over
the columns where both exist, divided by the image height.  Boxes are
matched one-to-one by descending IoU (at least 0.3).  The F-score formula
F = 2TP / (2TP + FP + FN) reproduces published result tables from their
raw counts.

    python demos/evaluate_detections.py
"""

import numpy as np

from marineseg.evaluation import FrameScore, aggregate, match_detections, reports_csv, score_frame

published = {"ISSM": (682, 1708, 206), "ISSM_S": (617, 82, 271)}
reports = [aggregate([FrameScore(0, None, *counts)], name) for name, counts in published.items()]
print("F-scores recomputed from published counts:")
print(reports_csv(reports))

pred = [[100, 200, 40, 30], [300, 220, 20, 20], [500, 260, 10, 10]]
gt = [[104, 198, 40, 32], [298, 221, 22, 18]]
m = match_detections(pred, gt)
print(f"one frame: TP={m.tp} FP={m.fp} FN={m.fn}, matched pairs {m.pairs}")

width, height = 640, 480
gt_edge = [[0, 250.0], [639, 260.0]]
pred_rows = np.linspace(250, 260, width) + 4.8
scores = [score_frame(0, pred, gt, (pred_rows, np.ones(width, bool)), gt_edge, width, height),
          score_frame(1, pred[:2], gt, (pred_rows - 4.8, np.ones(width, bool)), gt_edge, width, height)]
rep = aggregate(scores, "demo")
print(f"two frames: mu_edg {rep.mu_edg:.4f} (sigma {rep.sigma_edg:.4f}), "
      f"F {rep.f_score:.3f}, alphaFP {rep.alpha_fp:.2f}")
