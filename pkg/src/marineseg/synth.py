"""Synthetic stereo marine scenes with ground truth.

Every pixel is ray-traced against a flat water plane ``Y = h_cam`` (level
frame, camera at the origin), an optional shore modelled as a vertical
cylinder of radius ``shore_distance`` around the left camera, and a list of
planar obstacles standing on the water.  The right camera is displaced by
``baseline`` along the left camera's X axis and shares its orientation.

Artifacts follow the two failure sources the detector has to cope with:

* glitter: bright elliptical speckles on the water, drawn independently in
  each view (so they cannot be matched across views);
* reflection: the shore mirrored in the water, computed from the same
  geometry for both views (so it is consistent across views).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .detection import water_edge_rows
from .geometry import (
    CalibrationResult,
    CameraIntrinsics,
    HorizonLine,
    ImuReading,
    line_through,
)
from .stereo import StereoGeometry

log = logging.getLogger(__name__)

SKY, LAND, WATER = 0, 1, 2
OBSTACLE_BASE = 10  # label of obstacle k is OBSTACLE_BASE + k

CAMERAS = ("left", "right")
_STREAM_NOISE, _STREAM_GLITTER = 1, 2


@dataclass(frozen=True)
class ObstacleSpec:
    """Planar obstacle facing the camera, standing on the water (meters, level frame)."""

    x: float
    z: float
    width: float = 1.2
    height: float = 0.4
    color: tuple[float, float, float] = (0.85, 0.25, 0.1)
    color2: tuple[float, float, float] = (0.95, 0.85, 0.25)
    shape: str = "rect"  # "rect" or "ellipse"
    stripe_period: float = 0.3  # meters; 0 disables the two-tone stripes
    vx: float = 0.0  # motion per frame (meters)
    vz: float = 0.0

    def at_frame(self, i: int) -> "ObstacleSpec":
        return replace(self, x=self.x + self.vx * i, z=self.z + self.vz * i)


@dataclass(frozen=True)
class GlitterSpec:
    count: int = 0
    radius_range: tuple[float, float] = (0.012, 0.02)  # semi-major axis, fraction of width
    aspect_range: tuple[float, float] = (0.6, 1.0)
    brightness: float = 0.95
    sparkle: float = 0.35  # amplitude of the per-pixel random texture
    margin: float = 0.01  # min gap to other speckles/obstacles, fraction of width
    obstacle_clearance: float = 0.0  # extra gap to obstacles, fraction of width


@dataclass(frozen=True)
class ReflectionSpec:
    enabled: bool = False
    strength: float = 0.5


@dataclass
class SceneSpec:
    intrinsics: CameraIntrinsics
    rolls: Sequence[float] = (0.0,)
    pitches: Sequence[float] | None = None
    calibration: CalibrationResult = field(default_factory=CalibrationResult.identity)
    camera_height: float = 0.7
    baseline: float = 0.3
    shore_distance: float | None = 250.0
    land_height: float = 25.0
    sky_color: tuple[float, float, float] = (0.62, 0.74, 0.9)
    land_color: tuple[float, float, float] = (0.3, 0.42, 0.22)
    water_color: tuple[float, float, float] = (0.1, 0.28, 0.42)
    noise_sigma: tuple[float, float, float] = (0.01, 0.02, 0.015)  # sky, land, water
    obstacle_sigma: float = 0.01
    obstacles: Sequence[ObstacleSpec] = ()
    glitter: GlitterSpec = GlitterSpec()
    reflection: ReflectionSpec = ReflectionSpec()
    fps: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not self.baseline > 0:
            raise ValueError("baseline must be positive")
        if self.pitches is None:
            self.pitches = tuple(0.0 for _ in self.rolls)
        if len(self.pitches) != len(self.rolls):
            raise ValueError("rolls and pitches must have the same length")
        if not self.camera_height > 0:
            raise ValueError("camera height must be positive")
        if self.shore_distance is not None and not self.shore_distance > 0:
            raise ValueError("shore distance must be positive")

    @property
    def n_frames(self) -> int:
        return len(self.rolls)

    def imu(self, i: int) -> ImuReading:
        return ImuReading(i / self.fps, float(self.rolls[i]), float(self.pitches[i]))

    def stereo_geometry(self) -> StereoGeometry:
        K = self.intrinsics.K
        size = (self.intrinsics.width, self.intrinsics.height)
        return StereoGeometry.from_extrinsics(K, K, np.eye(3), [-self.baseline, 0.0, 0.0], size)


def default_intrinsics(width: int = 1278, height: int = 958, fx: float | None = None) -> CameraIntrinsics:
    f = fx if fx is not None else 740.0 * width / 1278.0
    return CameraIntrinsics(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                            width=width, height=height)


def random_obstacles(rng: np.random.Generator, n: int, z_range=(3.0, 6.0),
                     max_bearing: float = math.radians(30.0)) -> list[ObstacleSpec]:
    """Non-overlapping (in bearing) obstacles close enough to span a few working-resolution cells."""
    out: list[ObstacleSpec] = []
    tries = 0
    while len(out) < n and tries < 200 * max(n, 1):
        tries += 1
        z = rng.uniform(*z_range)
        bearing = rng.uniform(-max_bearing, max_bearing)
        width = rng.uniform(0.8, 1.6)
        x = z * math.tan(bearing)
        half = math.atan2(width / 2 + 0.4, z)
        if any(abs(math.atan2(o.x, o.z) - bearing) < half + math.atan2(o.width / 2, o.z) for o in out):
            continue
        c1 = tuple(float(v) for v in rng.uniform(0.55, 0.95, 3) * np.array([1.0, 0.6, 0.4]))
        c2 = tuple(float(v) for v in rng.uniform(0.7, 1.0, 3))
        out.append(ObstacleSpec(x=x, z=z, width=width, height=rng.uniform(0.3, 0.4),
                                color=c1, color2=c2,
                                shape=("rect", "ellipse")[int(rng.integers(2))]))
    return out


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------

def camera_to_level(imu: ImuReading, calib: CalibrationResult) -> np.ndarray:
    """Rotation taking camera-frame vectors to the level frame."""
    return calib.R_usv_imu @ imu.rotation().T @ calib.R_cam_usv.T


def true_horizon(imu: ImuReading, calib: CalibrationResult, intr: CameraIntrinsics) -> HorizonLine:
    """Horizon as the vanishing line of the water plane (pinhole cameras only).

    Independent of the two-point construction in the geometry module: the
    line is ``l = K^-T R n`` with ``n`` the plane normal in the level frame
    and ``R`` the level-to-camera rotation.
    """
    if intr.has_distortion:
        raise ValueError("the vanishing line is only a straight line for an undistorted camera")
    R = camera_to_level(imu, calib).T
    a, b, c = np.linalg.inv(intr.K).T @ (R @ np.array([0.0, 1.0, 0.0]))
    if abs(b) < 1e-12:
        return HorizonLine.invalid()
    u0 = intr.cx
    p1 = np.array([u0, -(a * u0 + c) / b])
    p2 = np.array([u0 + 1.0, -(a * (u0 + 1.0) + c) / b])
    return line_through(p1, p2, u0)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

@dataclass
class CameraRender:
    image: np.ndarray  # (H, W, 3) float in [0, 1]
    labels: np.ndarray  # (H, W) uint8
    reflection: np.ndarray | None = None  # (H, W, 3) mirrored land colour
    reflection_weight: np.ndarray | None = None  # (H, W)


@dataclass
class TruthBox:
    obstacle: int
    box: tuple[int, int, int, int]
    disparity: float
    kind: str  # "large" or "small"

    def to_dict(self) -> dict:
        return {"id": self.obstacle, "box": list(self.box),
                "disparity": round(self.disparity, 6), "kind": self.kind}


@dataclass
class FrameTruth:
    index: int
    imu: ImuReading
    horizon: HorizonLine
    edge: dict[str, np.ndarray]  # per camera, row per column, -1 where no water
    boxes: dict[str, list[TruthBox]]
    glitter: dict[str, list[tuple[int, int, int, int]]]
    glitter_centroids: dict[str, list[tuple[float, float]]]


@dataclass
class SyntheticSequence:
    spec: SceneSpec
    left: list[np.ndarray]
    right: list[np.ndarray]
    imu: list[ImuReading]
    truth: list[FrameTruth]
    labels: list[dict[str, np.ndarray]] | None = None

    @property
    def n_frames(self) -> int:
        return len(self.left)

    def frames(self, camera: str) -> list[np.ndarray]:
        return self.left if camera == "left" else self.right


def _rng(spec: SceneSpec, frame: int, camera: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, frame, camera, stream])


def _pixel_rays(intr: CameraIntrinsics) -> np.ndarray:
    vv, uu = np.mgrid[0:intr.height, 0:intr.width].astype(float)
    return intr.pixel_rays(np.stack([uu, vv], axis=-1))


def _land_profile(phi: np.ndarray, height: float) -> np.ndarray:
    return height * (1 + 0.3 * np.sin(3 * phi + 0.4) + 0.15 * np.sin(11 * phi + 0.7))


def _land_colour(spec: SceneSpec, phi: np.ndarray, elev: np.ndarray) -> np.ndarray:
    base = np.asarray(spec.land_color)
    tex = 1 + 0.18 * np.sin(37 * phi + 1.3) + 0.12 * np.sin(113 * phi) * np.cos(3 * elev)
    shade = 1 - 0.25 * np.clip(elev, 0, 1)
    return np.clip(base * (tex * shade)[..., None], 0, 1)


def _cylinder_hit(c: np.ndarray, d: np.ndarray, radius: float) -> np.ndarray:
    a = d[..., 0] ** 2 + d[..., 2] ** 2
    b = 2 * (c[0] * d[..., 0] + c[2] * d[..., 2])
    cc = c[0] ** 2 + c[2] ** 2 - radius ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (-b + np.sqrt(np.maximum(b * b - 4 * a * cc, 0.0))) / (2 * a)
    return np.where(a > 0, t, np.inf)


def _shore(spec: SceneSpec, c: np.ndarray, d: np.ndarray):
    """Ray/shore intersection.

    Returns (hit mask, azimuth, relative elevation on the land band, and
    whether the ray has already dropped below the water level at the shore).
    """
    h = spec.camera_height
    t = _cylinder_hit(c, d, spec.shore_distance)
    P = c + t[..., None] * d
    phi = np.arctan2(P[..., 0], P[..., 2])
    top = _land_profile(phi, spec.land_height)
    above_water = h - P[..., 1]
    hit = np.isfinite(t) & (above_water >= 0) & (above_water <= top)
    return hit, phi, above_water / top, P[..., 1] > h


def render_camera(spec: SceneSpec, frame: int, camera: int, rays: np.ndarray | None = None) -> CameraRender:
    """Noise-free geometry plus per-band noise and obstacles for one view (no artifacts)."""
    intr = spec.intrinsics
    imu = spec.imu(frame)
    A = camera_to_level(imu, spec.calibration)
    rays = _pixel_rays(intr) if rays is None else rays
    d = rays @ A.T
    c = A @ np.array([spec.baseline if camera == 1 else 0.0, 0.0, 0.0])
    h = spec.camera_height
    H, W = intr.height, intr.width

    down = d[..., 1] > 0
    if spec.shore_distance is None:
        water = down
        land = np.zeros_like(down)
        phi = elev = None
    else:
        land, phi, elev, below = _shore(spec, c, d)
        water = down & below & ~land
        land &= ~water
    labels = np.full((H, W), SKY, np.uint8)
    labels[land] = LAND
    labels[water] = WATER

    img = np.empty((H, W, 3))
    elev_sky = np.clip(-d[..., 1] / np.hypot(d[..., 0], d[..., 2]), 0, 1)
    img[:] = np.asarray(spec.sky_color) * (1 - 0.2 * elev_sky)[..., None]
    img[water] = spec.water_color
    if land.any():
        img[land] = _land_colour(spec, phi[land], elev[land])

    rng = _rng(spec, frame, camera, _STREAM_NOISE)
    sigma = np.asarray(spec.noise_sigma)[np.minimum(labels, 2)]
    img += rng.standard_normal((H, W, 3), dtype=np.float32) * sigma[..., None]

    # Obstacles, far to near (painter's order).
    order = sorted(range(len(spec.obstacles)), key=lambda k: -spec.obstacles[k].at_frame(frame).z)
    for k in order:
        ob = spec.obstacles[k].at_frame(frame)
        win = _obstacle_window(ob, c, A, intr, h)
        if win is None:
            continue
        m, X = _obstacle_mask(ob, c, d[win], h)
        if not m.any():
            continue
        labels[win][m] = OBSTACLE_BASE + k
        if ob.stripe_period > 0:
            band = np.floor((X[m] - ob.x + ob.width / 2) / ob.stripe_period).astype(int) % 2
            col = np.where(band[:, None] == 0, ob.color, ob.color2)
        else:
            col = np.broadcast_to(ob.color, (int(m.sum()), 3))
        img[win][m] = col + rng.standard_normal(col.shape) * spec.obstacle_sigma

    refl = weight = None
    if spec.reflection.enabled and spec.shore_distance is not None:
        refl, weight = _reflection_layer(spec, c, d, labels)
    return CameraRender(np.clip(img, 0, 1), labels, refl, weight)


def _obstacle_window(ob: ObstacleSpec, c: np.ndarray, A: np.ndarray, intr: CameraIntrinsics,
                     h: float) -> tuple[slice, slice] | None:
    """Image window that contains the obstacle (whole image for distorted cameras)."""
    H, W = intr.height, intr.width
    if intr.has_distortion:
        return (slice(0, H), slice(0, W))
    corners = np.array([[ob.x + sx * ob.width / 2, h - sy * ob.height, ob.z]
                        for sx in (-1, 1) for sy in (0, 1)])
    cam = (corners - c) @ A  # level -> camera is A.T, applied to row vectors
    if np.any(cam[:, 2] <= 1e-6):
        return None if np.all(cam[:, 2] <= 1e-6) else (slice(0, H), slice(0, W))
    uv = cam[:, :2] / cam[:, 2:3] * [intr.fx, intr.fy] + [intr.cx, intr.cy]
    c0 = max(int(math.floor(uv[:, 0].min())) - 2, 0)
    c1 = min(int(math.ceil(uv[:, 0].max())) + 3, W)
    r0 = max(int(math.floor(uv[:, 1].min())) - 2, 0)
    r1 = min(int(math.ceil(uv[:, 1].max())) + 3, H)
    if c0 >= c1 or r0 >= r1:
        return None
    return (slice(r0, r1), slice(c0, c1))


def _obstacle_mask(ob: ObstacleSpec, c: np.ndarray, d: np.ndarray, h: float):
    if ob.z - c[2] <= 0:
        return np.zeros(d.shape[:2], bool), None
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ob.z - c[2]) / d[..., 2]
    P = c + t[..., None] * d
    X, Y = P[..., 0], P[..., 1]
    front = (d[..., 2] > 0) & np.isfinite(t)
    if ob.shape == "ellipse":
        cy = h - ob.height / 2
        inside = ((X - ob.x) / (ob.width / 2)) ** 2 + ((Y - cy) / (ob.height / 2)) ** 2 <= 1
    else:
        inside = (np.abs(X - ob.x) <= ob.width / 2) & (Y >= h - ob.height) & (Y <= h)
    return front & inside, X


def _reflection_layer(spec: SceneSpec, c: np.ndarray, d: np.ndarray, labels: np.ndarray):
    """Shore mirrored in the water surface, for water pixels only."""
    h = spec.camera_height
    water = labels == WATER
    refl = np.zeros(labels.shape + (3,))
    weight = np.zeros(labels.shape)
    if not water.any():
        return refl, weight
    dw = d[water]
    t = (h - c[1]) / dw[:, 1]
    P = c + t[:, None] * dw
    dm = dw * np.array([1.0, -1.0, 1.0])
    hit, phi, elev = _shore_from_points(spec, P, dm)
    idx = np.flatnonzero(water.ravel())[hit]
    refl.reshape(-1, 3)[idx] = _land_colour(spec, phi[hit], elev[hit])
    weight.ravel()[idx] = spec.reflection.strength
    return refl, weight


def _shore_from_points(spec: SceneSpec, P: np.ndarray, d: np.ndarray):
    """Like :func:`_shore` but with a separate origin per ray."""
    h = spec.camera_height
    R = spec.shore_distance
    a = d[:, 0] ** 2 + d[:, 2] ** 2
    b = 2 * (P[:, 0] * d[:, 0] + P[:, 2] * d[:, 2])
    cc = P[:, 0] ** 2 + P[:, 2] ** 2 - R ** 2
    disc = b * b - 4 * a * cc
    ok = (a > 0) & (disc >= 0) & (cc < 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(ok, (-b + np.sqrt(np.maximum(disc, 0))) / (2 * a), np.inf)
    Q = P + t[:, None] * d
    phi = np.arctan2(Q[:, 0], Q[:, 2])
    top = _land_profile(phi, spec.land_height)
    above = h - Q[:, 1]
    hit = ok & (above >= 0) & (above <= top)
    return hit, phi, above / top


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

@dataclass
class GlitterSpeckle:
    center: tuple[float, float]  # (u, v)
    box: tuple[int, int, int, int]


def _place_glitter(spec: SceneSpec, labels: np.ndarray, rng: np.random.Generator,
                   count: int) -> list[tuple[float, float, float, float, float]]:
    """Sample non-overlapping ellipses (u, v, a, b, theta) lying fully on open water."""
    g = spec.glitter
    H, W = labels.shape
    water = labels == WATER
    rows, cols = np.nonzero(water)
    if rows.size == 0:
        return []
    margin = g.margin * W
    placed: list[tuple[float, float, float, float, float]] = []
    boxes: list[tuple[float, float, float, float]] = []
    obst = labels >= OBSTACLE_BASE
    tries = 0
    while len(placed) < count and tries < 400 * count:
        tries += 1
        k = int(rng.integers(rows.size))
        u, v = float(cols[k]), float(rows[k])
        a = rng.uniform(*g.radius_range) * W
        b = a * rng.uniform(*g.aspect_range)
        th = rng.uniform(0, math.pi)
        ex = math.hypot(a * math.cos(th), b * math.sin(th))
        ey = math.hypot(a * math.sin(th), b * math.cos(th))
        box = (u - ex - margin, v - ey - margin, u + ex + margin, v + ey + margin)
        if box[0] < 0 or box[1] < 0 or box[2] > W - 1 or box[3] > H - 1:
            continue
        r0, r1, c0, c1 = int(box[1]), int(box[3]) + 1, int(box[0]), int(box[2]) + 1
        if not water[r0:r1, c0:c1].all():
            continue
        pad = int(math.ceil(g.obstacle_clearance * W))
        if obst[max(r0 - pad, 0):r1 + pad, max(c0 - pad, 0):c1 + pad].any():
            continue
        if any(box[0] < q[2] and q[0] < box[2] and box[1] < q[3] and q[1] < box[3] for q in boxes):
            continue
        placed.append((u, v, a, b, th))
        boxes.append(box)
    if len(placed) < count:
        log.warning("placed only %d of %d glitter speckles", len(placed), count)
    return placed


def _draw_glitter(img: np.ndarray, speckles, rng: np.random.Generator, g: GlitterSpec):
    out: list[GlitterSpeckle] = []
    H, W = img.shape[:2]
    for (u, v, a, b, th) in speckles:
        r0, r1 = max(int(v - a) - 1, 0), min(int(v + a) + 2, H)
        c0, c1 = max(int(u - a) - 1, 0), min(int(u + a) + 2, W)
        vv, uu = np.mgrid[r0:r1, c0:c1].astype(float)
        x, y = uu - u, vv - v
        ct, st = math.cos(th), math.sin(th)
        m = ((x * ct + y * st) / a) ** 2 + ((-x * st + y * ct) / b) ** 2 <= 1
        n = int(m.sum())
        if n == 0:
            continue
        tex = g.brightness - g.sparkle * rng.random((n, 1)) ** 2
        tint = rng.uniform(0.9, 1.0, (n, 3))
        img[r0:r1, c0:c1][m] = np.clip(tex * tint, 0, 1)
        rr, cc = np.nonzero(m)
        out.append(GlitterSpeckle((u, v), (c0 + int(cc.min()), r0 + int(rr.min()),
                                           int(cc.max() - cc.min()) + 1, int(rr.max() - rr.min()) + 1)))
    return out


def inject_artifacts(render: CameraRender, spec: SceneSpec, frame: int, camera: int):
    """Blend reflections and draw glitter; returns (image, glitter speckles).

    With no glitter and reflections disabled the image is returned unchanged.
    Glitter uses a random stream private to (frame, camera), so the two views
    receive unrelated speckles.
    """
    img = render.image
    if render.reflection is not None and render.reflection_weight is not None:
        w = render.reflection_weight[..., None]
        img = (1 - w) * img + w * render.reflection
    speckles: list[GlitterSpeckle] = []
    if spec.glitter.count > 0:
        img = img.copy()
        rng = _rng(spec, frame, camera, _STREAM_GLITTER)
        placed = _place_glitter(spec, render.labels, rng, spec.glitter.count)
        speckles = _draw_glitter(img, placed, rng, spec.glitter)
    return img, speckles


# ---------------------------------------------------------------------------
# Ground truth and sequences
# ---------------------------------------------------------------------------

def obstacle_boxes(labels: np.ndarray, n_obstacles: int) -> dict[int, tuple[int, int, int, int]]:
    """Bounding boxes of the visible pixels of each obstacle label."""
    out = {}
    for k in range(n_obstacles):
        rr, cc = np.nonzero(labels == OBSTACLE_BASE + k)
        if rr.size:
            out[k] = (int(cc.min()), int(rr.min()), int(cc.max() - cc.min()) + 1,
                      int(rr.max() - rr.min()) + 1)
    return out


def edge_from_labels(labels: np.ndarray) -> np.ndarray:
    e = water_edge_rows(labels == WATER)
    return np.where(e.valid, e.rows, -1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)


def render_frame(spec: SceneSpec, i: int, rays: np.ndarray | None = None, keep_labels: bool = False):
    """Render one stereo frame; returns (left uint8, right uint8, FrameTruth, labels or None)."""
    intr = spec.intrinsics
    rays = _pixel_rays(intr) if rays is None else rays
    imu = spec.imu(i)
    for k, ob in enumerate(spec.obstacles):
        if ob.at_frame(i).z <= 0:
            log.warning("obstacle %d is behind the camera in frame %d; skipped", k, i)
    images, edges, boxes, glitter, cents, labs = {}, {}, {}, {}, {}, {}
    for cam_id, cam in enumerate(CAMERAS):
        r = render_camera(spec, i, cam_id, rays)
        img, speckles = inject_artifacts(r, spec, i, cam_id)
        images[cam] = to_uint8(img)
        edge = edge_from_labels(r.labels)
        edges[cam] = edge
        glitter[cam] = [s.box for s in speckles]
        cents[cam] = [s.center for s in speckles]
        labs[cam] = r.labels
    for cam in CAMERAS:
        bx = obstacle_boxes(labs[cam], len(spec.obstacles))
        tb = []
        for k, box in sorted(bx.items()):
            ob = spec.obstacles[k].at_frame(i)
            u, v, w, h = box
            cols = edges[cam][u:u + w]
            cols = cols[cols >= 0]
            kind = "large" if cols.size == 0 or v <= cols.min() else "small"
            tb.append(TruthBox(k, box, intr.fx * spec.baseline / ob.z, kind))
        boxes[cam] = tb
    horizon = true_horizon(imu, spec.calibration, intr) if not intr.has_distortion else HorizonLine.invalid()
    truth = FrameTruth(i, imu, horizon, edges, boxes, glitter, cents)
    return images["left"], images["right"], truth, (labs if keep_labels else None)


def render_sequence(spec: SceneSpec, keep_labels: bool = False) -> SyntheticSequence:
    """Render every frame of ``spec``; deterministic given ``spec.seed``."""
    rays = _pixel_rays(spec.intrinsics)
    left, right, truth, labels = [], [], [], []
    for i in range(spec.n_frames):
        l, r, t, lab = render_frame(spec, i, rays, keep_labels)
        left.append(l)
        right.append(r)
        truth.append(t)
        labels.append(lab)
    imu = [spec.imu(i) for i in range(spec.n_frames)]
    return SyntheticSequence(spec, left, right, imu, truth, labels if keep_labels else None)


def sinusoidal_motion(n_frames: int, roll_amp: float = math.radians(3.0),
                      pitch_amp: float = math.radians(1.5), period: float = 40.0,
                      phase: float = 0.0) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Gentle boat motion: roll and pitch sinusoids with different phases."""
    i = np.arange(n_frames)
    roll = roll_amp * np.sin(2 * math.pi * i / period + phase)
    pitch = pitch_amp * np.sin(2 * math.pi * i / (1.3 * period) + phase + 1.0)
    return tuple(float(x) for x in roll), tuple(float(x) for x in pitch)


def ground_point_cloud(R_cam_usv: np.ndarray | None = None, camera_height: float = 0.7,
                       n_points: int = 1500, noise: float = 0.01, outlier_fraction: float = 0.0,
                       half_width: float = 5.0, depth_range: tuple[float, float] = (1.0, 9.0),
                       outlier_height: float = 8.0, seed: int = 0) -> np.ndarray:
    """Camera-frame points on flat ground ``Y_usv = camera_height`` plus uniform outliers.

    Mimics the stereo reconstruction of the ground around a boat parked on
    land, the input of the camera-IMU calibration.  Ground points cover
    ``|x| <= half_width``, ``depth_range[0] <= z <= depth_range[1]`` (all
    within 10 m of the camera by default).  Outliers, like stereo mismatches,
    are uniform over the same footprint and within ``outlier_height`` of the
    ground on either side.
    """
    rng = np.random.default_rng(seed)
    R = np.eye(3) if R_cam_usv is None else np.asarray(R_cam_usv, dtype=float)
    n_out = int(round(outlier_fraction * n_points))
    n_in = n_points - n_out
    z0, z1 = depth_range
    ground = rng.uniform([-half_width, camera_height, z0], [half_width, camera_height, z1], (n_in, 3))
    ground[:, 1] += rng.standard_normal(n_in) * noise
    outliers = rng.uniform([-half_width, camera_height - outlier_height, z0],
                           [half_width, camera_height + outlier_height, z1], (n_out, 3))
    pts = np.concatenate([ground, outliers]) @ R.T
    return pts[rng.permutation(len(pts))]
