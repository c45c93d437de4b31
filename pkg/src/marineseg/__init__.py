"""IMU-assisted semantic segmentation for maritime obstacle detection.

Modules:

* ``geometry``: camera model, IMU horizon projection, camera-IMU calibration
* ``segmentation``: horizon-conditioned Gaussian mixture / MRF fitted by EM
* ``detection``: water mask, obstacle blobs, boxes and water edge
* ``stereo``: epipolar gating and NCC verification of detections
* ``pipeline``: per-frame mono and stereo detectors with warm start
* ``synth``: synthetic stereo sequences with exact ground truth
* ``evaluation``: edge error, TP/FP/FN matching, F-score and reports
* ``formats`` / ``cli``: files on disk and the ``marineseg`` command
"""

from .detection import Detection, WaterEdge, extract_obstacle_map, suppress_and_box, water_mask
from .evaluation import SequenceReport, aggregate, f_score, match_detections
from .exceptions import (
    BehindCameraError,
    CalibrationFailedError,
    InsufficientDataError,
    InvalidInputError,
    MarineSegError,
    NumericalDegeneracyError,
)
from .geometry import (
    CalibrationResult,
    CameraIntrinsics,
    HorizonLine,
    ImuReading,
    calibrate_camera_imu,
    estimate_horizon,
)
from .pipeline import DetectionConfig, MonoDetector, SegmentationConfig, StereoDetector
from .segmentation import FeatureImage, HyperPriorSet, MixtureModel, em_fit, segment
from .stereo import StereoGeometry, VerificationConfig, ncc_match, verify_stereo

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError", "CalibrationFailedError", "CalibrationResult", "CameraIntrinsics",
    "Detection", "DetectionConfig", "FeatureImage", "HorizonLine", "HyperPriorSet", "ImuReading",
    "InsufficientDataError", "InvalidInputError", "MarineSegError", "MixtureModel", "MonoDetector",
    "NumericalDegeneracyError", "SegmentationConfig", "SequenceReport", "StereoDetector",
    "StereoGeometry", "VerificationConfig", "WaterEdge", "aggregate", "calibrate_camera_imu",
    "em_fit", "estimate_horizon", "extract_obstacle_map", "f_score", "match_detections",
    "ncc_match", "segment", "suppress_and_box", "verify_stereo", "water_mask",
]
