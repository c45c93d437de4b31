"""Water mask, obstacle map, blob boxes and water edge from segmentation posteriors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .exceptions import InvalidInputError

WATER_INDEX = 2
EIGHT = np.ones((3, 3), dtype=bool)

DEFAULT_MIN_AREA = 25
DEFAULT_MERGE_DIST = 10.0
ENCLOSURE_FRACTION = 0.6


@dataclass(frozen=True)
class Detection:
    """Axis-aligned obstacle box ``[u, v, w, h]`` (top-left corner, size) in pixels."""

    u: int
    v: int
    w: int
    h: int
    pixel_count: int = 0
    camera: str = ""

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise InvalidInputError(f"detection box must be at least 1x1, got {self.w}x{self.h}")

    @property
    def box(self) -> tuple[int, int, int, int]:
        return (self.u, self.v, self.w, self.h)

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.u + self.w / 2.0, self.v + self.h / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)

    def within(self, width: int, height: int) -> bool:
        return self.u >= 0 and self.v >= 0 and self.u + self.w <= width and self.v + self.h <= height


@dataclass
class WaterEdge:
    rows: np.ndarray  # (W,) float, row of the topmost water pixel
    valid: np.ndarray  # (W,) bool

    @property
    def width(self) -> int:
        return len(self.rows)


@dataclass
class ObstacleMap:
    region: np.ndarray  # (H, W) bool, largest connected water region
    blobs: list[Detection] = field(default_factory=list)
    blob_mask: np.ndarray | None = None  # (H, W) bool, union of blob pixels

    @property
    def shape(self) -> tuple[int, int]:
        return self.region.shape


def water_mask(posteriors: np.ndarray) -> np.ndarray:
    """Binary water mask: water strictly beats every other class (ties go to non-water)."""
    p = np.asarray(posteriors)
    if p.ndim < 2 or p.shape[-1] != 4:
        raise InvalidInputError(f"posteriors must end in a 4-way axis, got {p.shape}")
    others = np.delete(p, WATER_INDEX, axis=-1).max(axis=-1)
    return p[..., WATER_INDEX] > others


def water_edge_rows(region: np.ndarray) -> WaterEdge:
    region = np.asarray(region, dtype=bool)
    valid = region.any(axis=0)
    rows = np.where(valid, np.argmax(region, axis=0), 0).astype(float)
    return WaterEdge(rows, valid)


def largest_component(mask: np.ndarray) -> np.ndarray:
    lab, n = ndimage.label(mask, structure=EIGHT)
    if n == 0:
        return np.zeros(mask.shape, dtype=bool)
    sizes = np.bincount(lab.ravel())
    sizes[0] = 0
    return lab == int(np.argmax(sizes))


def _enclosed(comp: np.ndarray, region: np.ndarray, edge: WaterEdge, offset: tuple[int, int]) -> bool:
    ring = ndimage.binary_dilation(comp, structure=EIGHT) & ~comp
    n_ring = int(ring.sum())
    if n_ring == 0:
        return False
    if region[ring].sum() < ENCLOSURE_FRACTION * n_ring:
        return False
    rr, cc = np.nonzero(comp)
    r0, c0 = offset
    col = int(round(cc.mean())) + c0
    col = min(max(col, 0), edge.width - 1)
    return bool(edge.valid[col]) and rr.mean() + r0 > edge.rows[col]


def extract_obstacle_map(mask: np.ndarray, camera: str = "") -> ObstacleMap:
    """Keep the largest 8-connected water region and list the non-water blobs it encloses.

    A blob counts as enclosed when at least 60% of its outer 8-neighbour ring
    is water and its centroid lies below the water edge.
    """
    mask = np.asarray(mask, dtype=bool)
    region = largest_component(mask)
    H, W = mask.shape
    blob_mask = np.zeros_like(region)
    if not region.any():
        return ObstacleMap(region, [], blob_mask)
    edge = water_edge_rows(region)
    lab, n = ndimage.label(~region, structure=EIGHT)
    blobs = []
    for i, sl in enumerate(ndimage.find_objects(lab), start=1):
        if sl is None:
            continue
        r0 = max(sl[0].start - 1, 0)
        c0 = max(sl[1].start - 1, 0)
        r1 = min(sl[0].stop + 1, H)
        c1 = min(sl[1].stop + 1, W)
        comp = lab[r0:r1, c0:c1] == i
        if not _enclosed(comp, region[r0:r1, c0:c1], edge, (r0, c0)):
            continue
        blob_mask[r0:r1, c0:c1] |= comp
        blobs.append(Detection(
            u=sl[1].start, v=sl[0].start,
            w=sl[1].stop - sl[1].start, h=sl[0].stop - sl[0].start,
            pixel_count=int(comp.sum()), camera=camera,
        ))
    return ObstacleMap(region, blobs, blob_mask)


def _block_starts(idx: np.ndarray, n_work: int) -> np.ndarray:
    """First full-resolution index of each working cell (idx maps full -> working)."""
    starts = np.searchsorted(idx, np.arange(n_work + 1))
    return starts


def extract_obstacle_map_upsampled(work_mask: np.ndarray, width: int, height: int,
                                   camera: str = "") -> ObstacleMap:
    """Same result as ``extract_obstacle_map(upsample_nearest(work_mask, width, height))``.

    Nearest-neighbour upsampling turns every working cell into a solid
    rectangle, which preserves 8-connectivity, so components are labelled on
    the small grid and only the enclosure test looks at full-resolution
    pixels (inside each blob's window).
    """
    from .segmentation import nearest_index

    work = np.asarray(work_mask, dtype=bool)
    h, w = work.shape
    if height < h or width < w:
        from .segmentation import upsample_nearest
        return extract_obstacle_map(upsample_nearest(work, width, height), camera)
    ri = nearest_index(height, h)
    ci = nearest_index(width, w)
    r_start = _block_starts(ri, h)
    c_start = _block_starts(ci, w)
    area = np.outer(np.diff(r_start), np.diff(c_start))

    lab, n = ndimage.label(work, structure=EIGHT)
    if n == 0:
        region_w = np.zeros_like(work)
    else:
        sizes = np.bincount(lab.ravel(), weights=area.ravel(), minlength=n + 1)
        sizes[0] = 0
        region_w = lab == int(np.argmax(sizes))
    region = region_w[ri][:, ci]
    blob_w = np.zeros_like(work)
    if not region_w.any():
        return ObstacleMap(region, [], blob_w[ri][:, ci])
    edge = water_edge_rows(region)
    blab, _ = ndimage.label(~region_w, structure=EIGHT)
    blobs = []
    for i, sl in enumerate(ndimage.find_objects(blab), start=1):
        if sl is None:
            continue
        R0, R1 = r_start[sl[0].start], r_start[sl[0].stop]
        C0, C1 = c_start[sl[1].start], c_start[sl[1].stop]
        r0, r1 = max(R0 - 1, 0), min(R1 + 1, height)
        c0, c1 = max(C0 - 1, 0), min(C1 + 1, width)
        comp = blab[ri[r0:r1]][:, ci[c0:c1]] == i
        if not _enclosed(comp, region[r0:r1, c0:c1], edge, (r0, c0)):
            continue
        blob_w |= blab == i
        blobs.append(Detection(u=int(C0), v=int(R0), w=int(C1 - C0), h=int(R1 - R0),
                               pixel_count=int(area[blab == i].sum()), camera=camera))
    return ObstacleMap(region, blobs, blob_w[ri][:, ci])


def box_gap(a: Detection, b: Detection) -> float:
    """Euclidean edge-to-edge distance between two boxes (0 if they touch or overlap)."""
    gx = max(0, max(a.u, b.u) - min(a.u + a.w, b.u + b.w))
    gy = max(0, max(a.v, b.v) - min(a.v + a.h, b.v + b.h))
    return math.hypot(gx, gy)


def _union(group: Sequence[Detection]) -> Detection:
    u0 = min(d.u for d in group)
    v0 = min(d.v for d in group)
    u1 = max(d.u + d.w for d in group)
    v1 = max(d.v + d.h for d in group)
    return Detection(u0, v0, u1 - u0, v1 - v0, sum(d.pixel_count for d in group), group[0].camera)


def _merge_once(dets: list[Detection], merge_dist: float) -> list[Detection]:
    n = len(dets)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if box_gap(dets[i], dets[j]) <= merge_dist:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[Detection]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(dets[i])
    return [_union(g) for _, g in sorted(groups.items())]


def _sort_key(d: Detection):
    return (-d.area, d.v, d.u, d.h, d.w)


def suppress_and_box(blobs: ObstacleMap | Iterable[Detection], min_area: int = DEFAULT_MIN_AREA,
                     merge_dist: float = DEFAULT_MERGE_DIST) -> list[Detection]:
    """Drop small blobs and merge nearby ones into their union boxes.

    Merging is the transitive closure of the "gap <= merge_dist" relation,
    repeated on the union boxes until nothing changes, so the result is a
    fixed point (applying it again is a no-op).  Output is sorted by box
    area, largest first.
    """
    if min_area < 1:
        raise InvalidInputError("min_area must be at least 1")
    items = blobs.blobs if isinstance(blobs, ObstacleMap) else list(blobs)
    dets = sorted((d for d in items if d.pixel_count >= min_area), key=_sort_key)
    while True:
        merged = _merge_once(dets, merge_dist)
        if len(merged) == len(dets):
            break
        dets = sorted(merged, key=_sort_key)
    return sorted(merged, key=_sort_key)


def water_edge(obstacle_map: ObstacleMap) -> WaterEdge:
    """Per column, the topmost row of the largest water region."""
    return water_edge_rows(obstacle_map.region)


def with_camera(dets: Iterable[Detection], camera: str) -> list[Detection]:
    return [replace(d, camera=camera) for d in dets]
