"""Per-frame monocular (Alg. 1) and stereo (Alg. 2) obstacle detection."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import detection as det
from .geometry import DEFAULT_ALPHA_H, CalibrationResult, CameraIntrinsics, HorizonLine, ImuReading, estimate_horizon
from .segmentation import (
    DEFAULT_BLUR_SIGMA,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    DEFAULT_WORKING_SIZE,
    FeatureImage,
    HyperPriorSet,
    MixtureModel,
    segment,
)
from .stereo import StereoGeometry, StereoResult, VerificationConfig, verify_stereo

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentationConfig:
    working_size: tuple[int, int] = DEFAULT_WORKING_SIZE  # (width, height)
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    blur_sigma: float = DEFAULT_BLUR_SIGMA
    displacements: tuple[float, float, float] = tuple(HyperPriorSet.default().displacements)
    mean_update: str = "standard"
    alpha_h: float = DEFAULT_ALPHA_H
    camera_height: float = 0.7
    use_imu: bool = True

    def hyper_priors(self) -> HyperPriorSet:
        hyp = HyperPriorSet.default()
        hyp.displacements = np.asarray(self.displacements, dtype=float)
        return hyp


@dataclass(frozen=True)
class DetectionConfig:
    min_area: int = det.DEFAULT_MIN_AREA
    merge_dist: float = det.DEFAULT_MERGE_DIST


@dataclass
class FrameResult:
    horizon: HorizonLine
    model: MixtureModel
    detections: list[det.Detection]
    edge: det.WaterEdge
    warm_started: bool
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.model.iterations


class MonoDetector:
    """Alg. 1 for one camera; keeps the fitted model between frames for warm starts."""

    def __init__(self, intrinsics: CameraIntrinsics, calibration: CalibrationResult | None = None,
                 seg: SegmentationConfig = SegmentationConfig(), dcfg: DetectionConfig = DetectionConfig(),
                 camera: str = "", warm_start: bool = True):
        self.intrinsics = intrinsics
        self.calibration = calibration or CalibrationResult.identity()
        self.seg = seg
        self.dcfg = dcfg
        self.camera = camera
        self.use_warm_start = warm_start
        self.previous: MixtureModel | None = None
        self._hyp = seg.hyper_priors()

    def reset(self):
        self.previous = None

    def horizon(self, imu: ImuReading | None) -> HorizonLine:
        if imu is None or not self.seg.use_imu:
            return HorizonLine.invalid()
        return estimate_horizon(imu, self.calibration, self.intrinsics, self.seg.alpha_h,
                                self.seg.camera_height)

    def process(self, rgb: np.ndarray, imu: ImuReading | None) -> FrameResult:
        H, W = rgb.shape[:2]
        if (W, H) != (self.intrinsics.width, self.intrinsics.height):
            raise ValueError(f"frame is {W}x{H}, calibration expects "
                             f"{self.intrinsics.width}x{self.intrinsics.height}")
        t0 = time.perf_counter()
        ww, wh = self.seg.working_size
        h_full = self.horizon(imu)
        h_work = h_full.resampled(ww / W, wh / H) if h_full.valid else h_full
        img = FeatureImage.from_rgb(rgb, (ww, wh))
        warm = self.previous if self.use_warm_start else None
        model, _, _ = segment(img, h_work, self._hyp, warm_start=warm, blur_sigma=self.seg.blur_sigma,
                              max_iters=self.seg.max_iters, tol=self.seg.tol,
                              mean_update=self.seg.mean_update)
        t1 = time.perf_counter()
        omap = det.extract_obstacle_map_upsampled(det.water_mask(model.posteriors), W, H, self.camera)
        boxes = det.suppress_and_box(omap, self.dcfg.min_area, self.dcfg.merge_dist)
        edge = det.water_edge(omap)
        t2 = time.perf_counter()
        self.previous = model
        return FrameResult(h_full, model, boxes, edge, warm is not None,
                           {"segmentation_ms": 1e3 * (t1 - t0), "detection_ms": 1e3 * (t2 - t1)})


@dataclass
class StereoFrameResult:
    left: FrameResult
    right: FrameResult
    stereo: StereoResult
    timings: dict[str, float] = field(default_factory=dict)


class StereoDetector:
    """Alg. 2: Alg. 1 on each camera, then epipolar/NCC verification and rescue."""

    def __init__(self, intrinsics: CameraIntrinsics, geometry: StereoGeometry,
                 calibration: CalibrationResult | None = None,
                 seg: SegmentationConfig = SegmentationConfig(), dcfg: DetectionConfig = DetectionConfig(),
                 vcfg: VerificationConfig = VerificationConfig(), warm_start: bool = True):
        self.left = MonoDetector(intrinsics, calibration, seg, dcfg, "left", warm_start)
        self.right = MonoDetector(intrinsics, calibration, seg, dcfg, "right", warm_start)
        self.geometry = geometry
        self.vcfg = vcfg

    def reset(self):
        self.left.reset()
        self.right.reset()

    def process(self, left_rgb: np.ndarray, right_rgb: np.ndarray, imu: ImuReading | None) -> StereoFrameResult:
        rl = self.left.process(left_rgb, imu)
        rr = self.right.process(right_rgb, imu)
        t0 = time.perf_counter()
        st = verify_stereo(rl.detections, rr.detections, left_rgb, right_rgb, self.geometry, self.vcfg)
        t1 = time.perf_counter()
        seg_ms = rl.timings["segmentation_ms"] + rr.timings["segmentation_ms"]
        det_ms = rl.timings["detection_ms"] + rr.timings["detection_ms"]
        return StereoFrameResult(rl, rr, st, {"segmentation_ms": seg_ms, "detection_ms": det_ms,
                                              "verification_ms": 1e3 * (t1 - t0)})


def model_fingerprint(model: MixtureModel | None) -> dict | None:
    """Compact summary of a fitted model, used to show what was carried to the next frame."""
    if model is None:
        return None
    return {
        "means": np.round(model.means, 6).tolist(),
        "posterior_mean": np.round(model.posteriors.reshape(-1, 4).mean(axis=0), 6).tolist(),
        "iterations": model.iterations,
    }
