"""Shared scene builders and brute-force oracles for the tests."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from marineseg.geometry import HorizonLine

SKY_RGB = (0.65, 0.78, 0.92)
MID_RGB = (0.30, 0.45, 0.22)
WATER_RGB = (0.10, 0.30, 0.45)


def three_band_scene(seed: int, size: int = 50, noise: float = 0.02):
    """Sky / middle / water bands with jittered colours and boundaries.

    Returns (rgb float image, label image 0/1/2, horizon at the sky-middle
    boundary in pixel coordinates of the grid).
    """
    rng = np.random.default_rng(seed)
    b1 = int(rng.integers(int(0.3 * size), int(0.45 * size)))
    b2 = b1 + int(rng.integers(int(0.08 * size), int(0.16 * size)))
    labels = np.zeros((size, size), dtype=int)
    labels[b1:b2] = 1
    labels[b2:] = 2
    base = np.array([SKY_RGB, MID_RGB, WATER_RGB]) + rng.uniform(-0.05, 0.05, (3, 3))
    img = base[labels] + rng.normal(0.0, noise, (size, size, 3))
    horizon = HorizonLine(angle=0.0, intercept=b1 - 0.5, u0=(size - 1) / 2.0)
    return np.clip(img, 0.0, 1.0), labels, horizon


# Published (TP, FP, FN, F-score) rows of the main results table.
TABLE2 = {
    "SSM": (264, 1156, 624, 0.229),
    "ISSM": (682, 1708, 206, 0.416),
    "ISSM_M1": (628, 1643, 260, 0.398),
    "ISSM_M2": (418, 1385, 470, 0.311),
    "ISSM_M3": (618, 1513, 270, 0.409),
    "ISSM_H": (441, 1604, 447, 0.301),
    "SSM_S": (215, 105, 673, 0.356),
    "ISSM_S": (617, 82, 271, 0.778),
}


def brute_ncc(t, s):
    """Loop-based, channel-averaged NCC over valid placements (test oracle)."""
    th, tw, C = t.shape
    out = np.zeros((s.shape[0] - th + 1, s.shape[1] - tw + 1))
    for r in range(out.shape[0]):
        for c in range(out.shape[1]):
            vals = []
            for ch in range(C):
                a = t[:, :, ch] - t[:, :, ch].mean()
                b = s[r:r + th, c:c + tw, ch]
                b = b - b.mean()
                den = math.sqrt((a * a).sum() * (b * b).sum())
                vals.append(0.0 if den < 1e-12 else (a * b).sum() / den)
            out[r, c] = np.mean(vals)
    return out


def flood_components(mask):
    """Plain BFS labelling with 8-connectivity (test oracle)."""
    H, W = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(H):
        for c in range(W):
            if mask[r, c] and not seen[r, c]:
                comp = []
                q = deque([(r, c)])
                seen[r, c] = True
                while q:
                    y, x = q.popleft()
                    comp.append((y, x))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < H and 0 <= xx < W and mask[yy, xx] and not seen[yy, xx]:
                                seen[yy, xx] = True
                                q.append((yy, xx))
                comps.append(comp)
    return comps


# Acceptance outcomes, filled in by tests/test_acceptance.py and printed by the
# terminal-summary hook in conftest.py: criterion number -> (passed, summary).
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
