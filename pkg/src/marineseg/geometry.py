"""Camera model, rotation algebra, IMU horizon projection and camera-IMU calibration.

Frame conventions
-----------------
All 3-D frames (camera, USV, IMU, level/world) share the camera axes:
X right, Y down, Z forward.  The water surface is the plane ``Y = h_cam``
of the level frame.

IMU Euler angles follow the intrinsic yaw-pitch-roll sequence.  The rotation
that maps level-frame vectors into the IMU frame is

    R_imu = Rz(roll) @ Rx(pitch)

(yaw is dropped, the horizon does not depend on it).  With this convention a
positive roll rotates the projected horizon clockwise on screen (positive
image slope, rows grow to the right) and a positive pitch raises the horizon
in the image (smaller row), i.e. positive pitch means bow-down attitude.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import (
    BehindCameraError,
    CalibrationFailedError,
    InsufficientDataError,
    InvalidInputError,
)

logger = logging.getLogger(__name__)

ROTATION_TOL = 1e-9
UNDISTORT_ITERS = 20
UNDISTORT_TOL_PX = 1e-10
EARTH_HORIZON_COEFF = 3.57e3  # l_dist = coeff * sqrt(h_cam), meters

DEFAULT_ALPHA_H = math.radians(40.0)


# ---------------------------------------------------------------------------
# Camera intrinsics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera with a two-coefficient polynomial radial distortion.

    Distortion acts on normalized coordinates: ``x_d = x (1 + k1 r^2 + k2 r^4)``.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if not (self.width > 0 and self.height > 0):
            raise InvalidInputError("image width and height must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise InvalidInputError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )
        vals = (self.fx, self.fy, self.cx, self.cy, self.k1, self.k2)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError("intrinsics must be finite")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def has_distortion(self) -> bool:
        return self.k1 != 0.0 or self.k2 != 0.0

    def distort(self, xy: np.ndarray) -> np.ndarray:
        """Apply radial distortion to normalized coordinates (..., 2)."""
        xy = np.asarray(xy, dtype=float)
        r2 = np.sum(xy * xy, axis=-1, keepdims=True)
        return xy * (1.0 + self.k1 * r2 + self.k2 * r2 * r2)

    def undistort(self, xy_d: np.ndarray) -> np.ndarray:
        """Invert :meth:`distort` by fixed-point iteration."""
        xy_d = np.asarray(xy_d, dtype=float)
        if not self.has_distortion:
            return xy_d.copy()
        tol = UNDISTORT_TOL_PX / max(self.fx, self.fy)
        xy = xy_d.copy()
        for _ in range(UNDISTORT_ITERS):
            r2 = np.sum(xy * xy, axis=-1, keepdims=True)
            new = xy_d / (1.0 + self.k1 * r2 + self.k2 * r2 * r2)
            done = np.max(np.abs(new - xy)) < tol if new.size else True
            xy = new
            if done:
                break
        return xy

    def normalized_to_pixel(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.stack([self.fx * xy[..., 0] + self.cx, self.fy * xy[..., 1] + self.cy], axis=-1)

    def pixel_to_normalized(self, uv: np.ndarray) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        return np.stack([(uv[..., 0] - self.cx) / self.fx, (uv[..., 1] - self.cy) / self.fy], axis=-1)

    def distort_pixels(self, uv: np.ndarray) -> np.ndarray:
        return self.normalized_to_pixel(self.distort(self.pixel_to_normalized(uv)))

    def undistort_pixels(self, uv: np.ndarray) -> np.ndarray:
        return self.normalized_to_pixel(self.undistort(self.pixel_to_normalized(uv)))

    def project(self, points_cam: np.ndarray) -> np.ndarray:
        """Project camera-frame points (..., 3) to distorted pixels.

        Raises BehindCameraError if any depth is not positive.
        """
        pts = np.asarray(points_cam, dtype=float)
        z = pts[..., 2]
        if np.any(~(z > 0)):
            raise BehindCameraError("point depth must be positive")
        xy = pts[..., :2] / z[..., None]
        return self.normalized_to_pixel(self.distort(xy))

    def pixel_rays(self, uv: np.ndarray) -> np.ndarray:
        """Unit-depth camera-frame rays through distorted pixels (..., 3)."""
        xy = self.undistort(self.pixel_to_normalized(uv))
        return np.concatenate([xy, np.ones(xy.shape[:-1] + (1,))], axis=-1)

    def scaled(self, sx: float, sy: float) -> "CameraIntrinsics":
        """Intrinsics of the same camera resampled by (sx, sy)."""
        return CameraIntrinsics(
            fx=self.fx * sx, fy=self.fy * sy, cx=self.cx * sx, cy=self.cy * sy,
            width=max(1, round(self.width * sx)), height=max(1, round(self.height * sy)),
            k1=self.k1, k2=self.k2,
        )


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0)
                and abs(np.linalg.det(R) - 1.0) <= tol)


def check_rotation(R: np.ndarray, name: str = "rotation") -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise InvalidInputError(f"{name} is not a proper rotation matrix")
    return R


def rotation_angle(R: np.ndarray) -> float:
    """Angle (radians) of the rotation R."""
    c = (np.trace(R) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


# ---------------------------------------------------------------------------
# IMU, horizon and calibration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImuReading:
    timestamp: float
    roll: float
    pitch: float
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"IMU {name} is not finite: {v}")
            if not (-math.pi < v <= math.pi):
                raise InvalidInputError(f"IMU {name} must lie in (-pi, pi], got {v}")

    def rotation(self) -> np.ndarray:
        """Level-frame to IMU-frame rotation (yaw ignored)."""
        return imu_rotation(self.roll, self.pitch)


def imu_rotation(roll: float, pitch: float) -> np.ndarray:
    return rot_z(roll) @ rot_x(pitch)


@dataclass(frozen=True)
class HorizonLine:
    """Image line ``v = intercept + tan(angle) * (u - u0)``.

    ``u0`` is the principal-point column of the image the line lives in.
    """

    angle: float
    intercept: float
    u0: float
    valid: bool = True

    def __post_init__(self):
        if self.valid and not (abs(self.angle) < math.pi / 2 and math.isfinite(self.intercept)):
            raise InvalidInputError("valid horizon needs |angle| < pi/2 and finite intercept")

    @classmethod
    def invalid(cls) -> "HorizonLine":
        return cls(angle=0.0, intercept=float("nan"), u0=0.0, valid=False)

    @property
    def slope(self) -> float:
        return math.tan(self.angle)

    def row_at(self, u):
        return self.intercept + self.slope * (np.asarray(u, dtype=float) - self.u0)

    def resampled(self, sx: float, sy: float) -> "HorizonLine":
        """The same line in an image resampled by factors (sx, sy).

        Pixel centers sit at integer coordinates, so a pixel coordinate ``u``
        maps to ``(u + 0.5) * sx - 0.5``.
        """
        if not self.valid:
            return self
        return HorizonLine(
            angle=math.atan(self.slope * sy / sx),
            intercept=(self.intercept + 0.5) * sy - 0.5,
            u0=(self.u0 + 0.5) * sx - 0.5,
        )

    def to_dict(self) -> dict:
        return {"slope": self.slope, "angle": self.angle, "intercept": self.intercept,
                "u0": self.u0, "valid": self.valid}


@dataclass(frozen=True)
class CalibrationResult:
    R_cam_usv: np.ndarray = field(default_factory=lambda: np.eye(3))
    R_usv_imu: np.ndarray = field(default_factory=lambda: np.eye(3))
    inlier_count: int = 3
    residual_rms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "R_cam_usv", check_rotation(self.R_cam_usv, "R_cam_usv"))
        object.__setattr__(self, "R_usv_imu", check_rotation(self.R_usv_imu, "R_usv_imu"))
        if self.inlier_count < 3:
            raise InvalidInputError("calibration needs at least 3 inliers")

    @classmethod
    def identity(cls) -> "CalibrationResult":
        return cls()

    def __eq__(self, other):
        if not isinstance(other, CalibrationResult):
            return NotImplemented
        return (np.array_equal(self.R_cam_usv, other.R_cam_usv)
                and np.array_equal(self.R_usv_imu, other.R_usv_imu)
                and self.inlier_count == other.inlier_count
                and self.residual_rms == other.residual_rms)

    __hash__ = None


def as_point_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3) if np.size(points) else np.zeros((0, 3))
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("point cloud contains non-finite coordinates")
    return pts


# ---------------------------------------------------------------------------
# Horizon projection
# ---------------------------------------------------------------------------

def horizon_distance(camera_height: float) -> float:
    """Distance (m) to the visible horizon for a camera at the given height."""
    if not camera_height > 0:
        raise InvalidInputError("camera height must be positive")
    return EARTH_HORIZON_COEFF * math.sqrt(camera_height)


def horizon_world_points(imu: ImuReading, calib: CalibrationResult,
                         alpha_h: float = DEFAULT_ALPHA_H,
                         camera_height: float = 0.7) -> tuple[np.ndarray, np.ndarray]:
    """Two far points on the IMU XZ-plane at angles +-alpha_h, in the USV frame."""
    if not (0 < alpha_h < math.pi / 2):
        raise InvalidInputError("alpha_h must lie in (0, pi/2)")
    if not all(math.isfinite(v) for v in (imu.roll, imu.pitch, imu.yaw)):
        raise InvalidInputError("non-finite IMU angles")
    dist = horizon_distance(camera_height)
    lateral = dist * math.tan(alpha_h)
    M = imu.rotation() @ calib.R_usv_imu.T
    x1 = M @ np.array([-lateral, 0.0, dist])
    x2 = M @ np.array([lateral, 0.0, dist])
    return x1, x2


def project_point(X, calib: CalibrationResult, intr: CameraIntrinsics) -> np.ndarray:
    """Project a USV-frame point to a (distorted) pixel; may fall outside the image."""
    x_cam = calib.R_cam_usv @ np.asarray(X, dtype=float)
    if not x_cam[2] > 0:
        raise BehindCameraError(f"point has non-positive camera depth {x_cam[2]:.6g}")
    return intr.project(x_cam)


def line_through(p1: np.ndarray, p2: np.ndarray, u0: float) -> HorizonLine:
    du, dv = p2[0] - p1[0], p2[1] - p1[1]
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))) or abs(du) < 1e-12:
        return HorizonLine.invalid()
    slope = dv / du
    return HorizonLine(angle=math.atan(slope), intercept=float(p1[1] + slope * (u0 - p1[0])),
                       u0=float(u0))


def estimate_horizon(imu: ImuReading, calib: CalibrationResult, intr: CameraIntrinsics,
                     alpha_h: float = DEFAULT_ALPHA_H, camera_height: float = 0.7) -> HorizonLine:
    """Horizon line from an IMU reading via two projected, distorted far points."""
    x1, x2 = horizon_world_points(imu, calib, alpha_h, camera_height)
    try:
        p1 = project_point(x1, calib, intr)
        p2 = project_point(x2, calib, intr)
    except BehindCameraError:
        logger.debug("horizon point behind camera; horizon invalid")
        return HorizonLine.invalid()
    return line_through(p1, p2, intr.cx)


def true_horizon_rows(imu: ImuReading, calib: CalibrationResult, intr: CameraIntrinsics,
                      lens: Callable[[np.ndarray], np.ndarray] | None = None,
                      samples: int = 4001) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the imaged horizon curve per image column, under a given lens.

    ``lens`` maps undistorted to distorted normalized coordinates and defaults
    to the intrinsics' own distortion.  Returns (columns, rows) for the
    columns the curve spans inside the image.
    """
    lens = lens or intr.distort
    beta = np.linspace(-math.radians(89.5), math.radians(89.5), samples)
    dirs = np.stack([np.sin(beta), np.zeros_like(beta), np.cos(beta)], axis=1)
    M = calib.R_cam_usv @ imu.rotation() @ calib.R_usv_imu.T
    cam = dirs @ M.T
    cam = cam[cam[:, 2] > 1e-9]
    uv = intr.normalized_to_pixel(lens(cam[:, :2] / cam[:, 2:3]))
    inside = ((uv[:, 0] >= 0) & (uv[:, 0] <= intr.width - 1)
              & (uv[:, 1] >= 0) & (uv[:, 1] <= intr.height - 1))
    uv = uv[inside]
    if len(uv) < 2:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(uv[:, 0])
    uv = uv[order]
    cols = np.arange(math.ceil(uv[0, 0]), math.floor(uv[-1, 0]) + 1, dtype=float)
    return cols, np.interp(cols, uv[:, 0], uv[:, 1])


def horizon_fit_rmse(alpha_h: float, readings: Sequence[ImuReading], calib: CalibrationResult,
                     intr: CameraIntrinsics,
                     true_lens: Callable[[np.ndarray], np.ndarray] | None = None,
                     camera_height: float = 0.7) -> float:
    """RMSE (fraction of image height) between estimated lines and the true horizon.

    The estimate uses ``intr``'s distortion model; the truth uses ``true_lens``.
    """
    errs = []
    for imu in readings:
        cols, rows = true_horizon_rows(imu, calib, intr, true_lens)
        if cols.size == 0:
            continue
        line = estimate_horizon(imu, calib, intr, alpha_h, camera_height)
        if not line.valid:
            errs.append(np.full(cols.size, float(intr.height)))
            continue
        errs.append(line.row_at(cols) - rows)
    if not errs:
        return float("nan")
    e = np.concatenate(errs)
    return float(np.sqrt(np.mean(e * e)) / intr.height)


# ---------------------------------------------------------------------------
# Camera-IMU calibration
# ---------------------------------------------------------------------------

def fit_plane_lstsq(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Total-least-squares plane ``n . x = d`` with d >= 0."""
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    n = vt[-1]
    d = float(n @ centroid)
    if d < 0:
        n, d = -n, -d
    return n, d


def ransac_plane(points: np.ndarray, inlier_tol: float = 1.0, max_iters: int = 1000,
                 seed: int | None = 0) -> tuple[np.ndarray, float, np.ndarray]:
    """RANSAC plane fit with 3-point samples and a final least-squares refit.

    Returns (unit normal, offset, inlier mask); the normal is oriented so that
    the offset is non-negative (points toward the plane from the origin).
    """
    pts = as_point_cloud(points)
    n_pts = len(pts)
    if n_pts < 3:
        raise InsufficientDataError(f"need at least 3 points for a plane, got {n_pts}")
    rng = np.random.default_rng(seed)
    best_count, best_mask = -1, None
    for _ in range(max_iters):
        a, b, c = pts[rng.choice(n_pts, 3, replace=False)]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal /= norm
        mask = np.abs((pts - a) @ normal) <= inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask = count, mask
            if count == n_pts:
                break
    if best_mask is None:
        raise CalibrationFailedError("all RANSAC samples were degenerate (collinear points)")
    n, d = fit_plane_lstsq(pts[best_mask])
    # re-collect inliers against the refined plane
    mask = np.abs(pts @ n - d) <= inlier_tol
    if mask.sum() >= 3:
        n, d = fit_plane_lstsq(pts[mask])
    else:
        mask = best_mask
    return n, d, mask


def rotation_from_ground_normal(normal: np.ndarray) -> np.ndarray:
    """USV-to-camera rotation whose Y column equals the ground 'down' normal.

    Built as Rz(a) @ Rx(b); rotation about Y is fixed to zero.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    b = math.asin(max(-1.0, min(1.0, n[2])))
    a = math.atan2(-n[0], n[1])
    return rot_z(a) @ rot_x(b)


def calibrate_camera_imu(cloud, imu_static: ImuReading, dist_threshold: float = 10.0,
                         inlier_tol: float = 1.0, max_iters: int = 1000, seed: int | None = 0,
                         min_inlier_ratio: float = 0.5) -> CalibrationResult:
    """Estimate R_cam_usv from a ground-plane fit and R_usv_imu from a static IMU readout.

    The USV must be stationary on flat ground; ``cloud`` is in the camera frame.
    """
    pts = as_point_cloud(cloud)
    near = pts[np.linalg.norm(pts, axis=1) <= dist_threshold] if len(pts) else pts
    if len(near) < 3:
        raise InsufficientDataError(
            f"only {len(near)} points within {dist_threshold} m of the camera; need >= 3")
    n, d, mask = ransac_plane(near, inlier_tol, max_iters, seed)
    count = int(mask.sum())
    ratio = count / len(near)
    if ratio < min_inlier_ratio:
        raise CalibrationFailedError(
            f"RANSAC inlier ratio {ratio:.3f} below floor {min_inlier_ratio:.3f}")
    resid = near[mask] @ n - d
    rms = float(np.sqrt(np.mean(resid * resid)))
    return CalibrationResult(
        R_cam_usv=rotation_from_ground_normal(n),
        R_usv_imu=imu_static.rotation(),
        inlier_count=count,
        residual_rms=rms,
    )
