"""On-disk formats: frames, IMU log, calibration, annotations and detections.

Dataset layout::

    <root>/left/000000.png ...      lossless 8-bit RGB frames
    <root>/right/000000.png ...
    <root>/imu.csv                  frame,timestamp,roll,pitch,yaw (radians)
    <root>/calibration.json         intrinsics, rotations, stereo extrinsics
    <root>/annotations/left/000000.json ...
    <root>/annotations/right/000000.json ...

JSON is written with sorted keys and fixed indentation so that identical
content gives identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from PIL import Image

from .exceptions import InvalidInputError
from .geometry import CalibrationResult, CameraIntrinsics, HorizonLine, ImuReading

log = logging.getLogger(__name__)

FRAME_DIGITS = 6
IMU_COLUMNS = ("frame", "timestamp", "roll", "pitch", "yaw")


def frame_name(index: int, suffix: str = ".png") -> str:
    return f"{index:0{FRAME_DIGITS}d}{suffix}"


def write_json(path: Path | str, obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

def write_image(path: Path | str, rgb: np.ndarray) -> None:
    a = np.asarray(rgb)
    if a.dtype != np.uint8 or a.ndim != 3 or a.shape[2] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) uint8 image, got {a.dtype} {a.shape}")
    Image.fromarray(a, mode="RGB").save(path, format="PNG")


def read_image(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def list_frames(directory: Path | str, suffix: str = ".png") -> list[tuple[int, Path]]:
    """Zero-padded ``NNNNNN.png`` (or other suffix) files in index order; others are ignored."""
    d = Path(directory)
    if not d.is_dir():
        return []
    pattern = re.compile(r"^(\d+)" + re.escape(suffix) + "$")
    out = []
    for p in d.iterdir():
        m = pattern.match(p.name)
        if m:
            out.append((int(m.group(1)), p))
    return sorted(out)


# ---------------------------------------------------------------------------
# IMU log
# ---------------------------------------------------------------------------

def write_imu_csv(path: Path | str, readings: Sequence[ImuReading]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(IMU_COLUMNS)
        for i, r in enumerate(readings):
            w.writerow([i, repr(float(r.timestamp)), repr(float(r.roll)), repr(float(r.pitch)),
                        repr(float(r.yaw))])


def read_imu_csv(path: Path | str) -> list[ImuReading]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    out = []
    for k, row in enumerate(rows):
        try:
            out.append(ImuReading(float(row["timestamp"]), float(row["roll"]), float(row["pitch"]),
                                  float(row.get("yaw") or 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"{path}: bad IMU row {k + 1}: {e}") from e
    return out


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

@dataclass
class RigCalibration:
    intrinsics: CameraIntrinsics
    calibration: CalibrationResult
    stereo_R: np.ndarray | None = None  # right-from-left rotation
    stereo_t: np.ndarray | None = None  # right-from-left translation (m)

    @property
    def has_stereo(self) -> bool:
        return self.stereo_R is not None and self.stereo_t is not None

    def stereo_geometry(self):
        from .stereo import StereoGeometry

        if not self.has_stereo:
            raise InvalidInputError("calibration has no stereo extrinsics")
        K = self.intrinsics.K
        size = (self.intrinsics.width, self.intrinsics.height)
        return StereoGeometry.from_extrinsics(K, K, self.stereo_R, self.stereo_t, size)

    def to_dict(self) -> dict:
        i = self.intrinsics
        d = {
            "fx": i.fx, "fy": i.fy, "cx": i.cx, "cy": i.cy, "k1": i.k1, "k2": i.k2,
            "width": i.width, "height": i.height,
            "R_cam_usv": [float(x) for x in self.calibration.R_cam_usv.ravel()],
            "R_usv_imu": [float(x) for x in self.calibration.R_usv_imu.ravel()],
            "inlier_count": int(self.calibration.inlier_count),
            "residual_rms": float(self.calibration.residual_rms),
        }
        if self.has_stereo:
            d["stereo"] = {"R": [float(x) for x in np.ravel(self.stereo_R)],
                           "t": [float(x) for x in np.ravel(self.stereo_t)]}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RigCalibration":
        try:
            intr = CameraIntrinsics(fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]),
                                    cy=float(d["cy"]), width=int(d["width"]), height=int(d["height"]),
                                    k1=float(d.get("k1", 0.0)), k2=float(d.get("k2", 0.0)))
            eye = list(np.eye(3).ravel())
            calib = CalibrationResult(
                np.array(d.get("R_cam_usv", eye), dtype=float).reshape(3, 3),
                np.array(d.get("R_usv_imu", eye), dtype=float).reshape(3, 3),
                int(d.get("inlier_count", 3)), float(d.get("residual_rms", 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"bad calibration document: {e}") from e
        st = d.get("stereo")
        if st:
            return cls(intr, calib, np.array(st["R"], dtype=float).reshape(3, 3),
                       np.array(st["t"], dtype=float).reshape(3))
        return cls(intr, calib)


def write_calibration(path: Path | str, rig: RigCalibration) -> None:
    write_json(path, rig.to_dict())


def read_calibration(path: Path | str) -> RigCalibration:
    return RigCalibration.from_dict(read_json(path))


def load_point_cloud(path: Path | str) -> np.ndarray:
    """Load an (N, 3) cloud from ``.npy`` or a comma/whitespace separated text file."""
    p = Path(path)
    if p.suffix == ".npy":
        return np.load(p)
    text = p.read_text()
    if not text.strip():
        return np.zeros((0, 3))
    delim = "," if "," in text.splitlines()[0] else None
    try:
        return np.loadtxt(p, delimiter=delim, ndmin=2)
    except ValueError:
        return np.loadtxt(p, delimiter=delim, ndmin=2, skiprows=1)


# ---------------------------------------------------------------------------
# Annotations and detections
# ---------------------------------------------------------------------------

def edge_polyline(rows: np.ndarray, valid: np.ndarray | None = None) -> list[list[float]]:
    """[[col, row], ...] for the valid columns of a per-column edge."""
    rows = np.asarray(rows, dtype=float)
    valid = rows >= 0 if valid is None else np.asarray(valid, bool)
    return [[int(c), float(rows[c])] for c in np.flatnonzero(valid)]


def horizon_dict(h: HorizonLine) -> dict | None:
    if not h.valid:
        return None
    return {"slope": h.slope, "intercept": h.intercept, "u0": h.u0}


def _check_box(b, where: str) -> list[float]:
    if not isinstance(b, (list, tuple)) or len(b) != 4:
        raise InvalidInputError(f"{where}: box must be [u, v, w, h], got {b!r}")
    vals = [float(x) for x in b]
    if not all(math.isfinite(x) for x in vals) or vals[2] <= 0 or vals[3] <= 0:
        raise InvalidInputError(f"{where}: invalid box {b!r}")
    return vals


def validate_annotation(doc: Any, where: str = "annotation") -> dict:
    if not isinstance(doc, dict) or not isinstance(doc.get("frame"), int):
        raise InvalidInputError(f"{where}: missing integer 'frame'")
    edge = doc.get("edge", [])
    if not isinstance(edge, list) or any(not isinstance(p, (list, tuple)) or len(p) != 2 for p in edge):
        raise InvalidInputError(f"{where}: 'edge' must be a list of [col, row] pairs")
    for key in ("large_obstacles", "small_obstacles"):
        boxes = doc.get(key, [])
        if not isinstance(boxes, list):
            raise InvalidInputError(f"{where}: '{key}' must be a list")
        for b in boxes:
            _check_box(b, where)
    return doc


def read_annotation(path: Path | str) -> dict:
    try:
        doc = read_json(path)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidInputError(f"{path}: {e}") from e
    return validate_annotation(doc, str(path))


def annotation_boxes(doc: dict) -> list[list[float]]:
    """Ground-truth boxes of both obstacle classes (they score identically)."""
    return [list(map(float, b)) for b in doc.get("large_obstacles", []) + doc.get("small_obstacles", [])]


def validate_detections(doc: Any) -> dict:
    """Check the detections document produced by ``detect``."""
    if not isinstance(doc, dict) or doc.get("mode") not in ("mono", "stereo"):
        raise InvalidInputError("detections: 'mode' must be 'mono' or 'stereo'")
    entries = doc.get("detections")
    if not isinstance(entries, list):
        raise InvalidInputError("detections: 'detections' must be a list")
    for k, e in enumerate(entries):
        where = f"detections[{k}]"
        if not isinstance(e, dict) or not isinstance(e.get("frame"), int):
            raise InvalidInputError(f"{where}: missing integer 'frame'")
        if e.get("camera") not in ("left", "right"):
            raise InvalidInputError(f"{where}: camera must be 'left' or 'right'")
        boxes = e.get("boxes")
        if not isinstance(boxes, list):
            raise InvalidInputError(f"{where}: 'boxes' must be a list")
        for b in boxes:
            _check_box(b, where)
        if doc["mode"] == "stereo":
            for key in ("pair_id", "ncc_peak", "rescued"):
                if not isinstance(e.get(key), list) or len(e[key]) != len(boxes):
                    raise InvalidInputError(f"{where}: '{key}' must list one value per box")
    return doc


def detections_by_frame(doc: dict, camera: str) -> dict[int, dict]:
    return {e["frame"]: e for e in doc["detections"] if e["camera"] == camera}


def write_lines(path: Path | str, lines: Iterable[str]) -> None:
    Path(path).write_text("".join(line + "\n" for line in lines))


# ---------------------------------------------------------------------------
# Synthetic datasets
# ---------------------------------------------------------------------------

def annotation_document(truth, camera: str, image_height: int) -> dict:
    """Annotation JSON for one camera of a synthetic ``FrameTruth``."""
    boxes = truth.boxes[camera]
    return {
        "frame": truth.index,
        "edge": edge_polyline(truth.edge[camera]),
        "large_obstacles": [list(b.box) for b in boxes if b.kind == "large"],
        "small_obstacles": [list(b.box) for b in boxes if b.kind == "small"],
        "obstacles": [b.to_dict() for b in boxes],
        "horizon": horizon_dict(truth.horizon),
        "glitter": [list(g) for g in truth.glitter[camera]],
        "image_size": [int(len(truth.edge[camera])), int(image_height)],
    }


def write_dataset(seq, root: Path | str) -> Path:
    """Write a ``SyntheticSequence`` in the dataset layout described above."""
    from .synth import CAMERAS

    root = Path(root)
    for cam in CAMERAS:
        (root / cam).mkdir(parents=True, exist_ok=True)
        (root / "annotations" / cam).mkdir(parents=True, exist_ok=True)
    for i in range(seq.n_frames):
        for cam in CAMERAS:
            write_image(root / cam / frame_name(i), seq.frames(cam)[i])
            write_json(root / "annotations" / cam / frame_name(i, ".json"),
                       annotation_document(seq.truth[i], cam, seq.spec.intrinsics.height))
    write_imu_csv(root / "imu.csv", seq.imu)
    spec = seq.spec
    write_calibration(root / "calibration.json",
                      RigCalibration(spec.intrinsics, spec.calibration, np.eye(3),
                                     np.array([-spec.baseline, 0.0, 0.0])))
    return root
