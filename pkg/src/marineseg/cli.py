"""Command-line front end: ``marineseg calibrate|detect|synth|eval|bench``.

Every subcommand accepts ``--config FILE`` holding a single JSON object whose
keys are the long option names (dashes or underscores).  Precedence, lowest
to highest: built-in defaults, the config file, explicit command-line flags.

Exit codes: 0 success, 2 usage error, 3 insufficient data, 4 calibration
failed, 5 invalid input (unreadable files, count mismatches, bad documents).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import statistics
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import formats as fmt
from .evaluation import DEFAULT_IOU, aggregate, reports_csv, resample_polyline, score_frame
from .exceptions import CalibrationFailedError, InsufficientDataError, InvalidInputError
from .geometry import CalibrationResult, ImuReading, calibrate_camera_imu
from .pipeline import (
    DetectionConfig,
    MonoDetector,
    SegmentationConfig,
    StereoDetector,
    model_fingerprint,
)
from .stereo import VerificationConfig

log = logging.getLogger("marineseg")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INSUFFICIENT = 3
EXIT_CALIBRATION = 4
EXIT_INVALID = 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Option handling
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with option values (flags override it)")
    p.add_argument("-v", "--verbose", action="store_true", default=None)
    p.add_argument("-q", "--quiet", action="store_true", default=None)


def _segmentation_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("segmentation")
    g.add_argument("--working-size", type=int, nargs=2, metavar=("W", "H"))
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--blur-sigma", type=float)
    g.add_argument("--displacements", type=float, nargs=3, metavar=("D_SKY", "D_MID", "D_WATER"))
    g.add_argument("--alpha-h", type=float, help="horizon look-ahead angle in degrees")
    g.add_argument("--camera-height", type=float, help="camera height above water (m)")
    g.add_argument("--no-imu", action="store_true", default=None, help="ignore the IMU (plain SSM)")
    g.add_argument("--no-warm-start", action="store_true", default=None)
    g = p.add_argument_group("detection")
    g.add_argument("--min-area", type=int)
    g.add_argument("--merge-dist", type=float)
    g = p.add_argument_group("stereo verification")
    g.add_argument("--theta-s1", type=float)
    g.add_argument("--theta-s2", type=float)
    g.add_argument("--theta-ncc", type=float)


DEFAULTS: dict[str, Any] = {
    "working_size": [50, 50], "max_iters": 10, "tol": 1e-3, "blur_sigma": 2.0,
    "displacements": [-0.25, 0.05, 0.30], "alpha_h": 40.0, "camera_height": 0.7,
    "no_imu": False, "no_warm_start": False, "min_area": 25, "merge_dist": 10.0,
    "theta_s1": 1.2, "theta_s2": 3.0, "theta_ncc": 0.95, "mode": "mono", "iou": DEFAULT_IOU,
    "camera": "left", "seed": 0, "frames": 20, "width": 1278, "height": 958, "obstacles": 3,
    "glitter": 0, "reflection": False, "open_sea": False, "roll_amp": 3.0, "pitch_amp": 1.5,
    "period": 40.0, "baseline": 0.3, "dist_threshold": 10.0, "inlier_tol": 1.0,
    "ransac_iters": 1000, "min_inlier_ratio": 0.5, "roll": 0.0, "pitch": 0.0,
}


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the optional config file and explicit flags."""
    opts = dict(DEFAULTS)
    if args.config is not None:
        try:
            doc = fmt.read_json(args.config)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config {args.config}: {e}", EXIT_USAGE) from e
        if not isinstance(doc, dict):
            raise CliError(f"config {args.config} must be a JSON object", EXIT_USAGE)
        opts.update({k.replace("-", "_"): v for k, v in doc.items()})
    opts.update({k: v for k, v in vars(args).items() if v is not None and k != "config"})
    return opts


def _path(opts: dict, key: str, default: Path | None = None) -> Path | None:
    v = opts.get(key)
    return Path(v) if v is not None else default


def pipeline_configs(opts: dict) -> tuple[SegmentationConfig, DetectionConfig, VerificationConfig]:
    try:
        seg = SegmentationConfig(
            working_size=tuple(int(x) for x in opts["working_size"]),
            max_iters=int(opts["max_iters"]), tol=float(opts["tol"]),
            blur_sigma=float(opts["blur_sigma"]),
            displacements=tuple(float(x) for x in opts["displacements"]),
            alpha_h=math.radians(float(opts["alpha_h"])),
            camera_height=float(opts["camera_height"]), use_imu=not opts["no_imu"])
        dcfg = DetectionConfig(int(opts["min_area"]), float(opts["merge_dist"]))
        vcfg = VerificationConfig(float(opts["theta_s1"]), float(opts["theta_s2"]),
                                  float(opts["theta_ncc"]))
    except (TypeError, ValueError) as e:
        raise CliError(f"bad parameter: {e}", EXIT_USAGE) from e
    return seg, dcfg, vcfg


def _params(opts: dict) -> dict:
    keys = ("working_size", "max_iters", "tol", "blur_sigma", "displacements", "alpha_h",
            "camera_height", "no_imu", "no_warm_start", "min_area", "merge_dist")
    out = {k: opts[k] for k in keys}
    if opts["mode"] == "stereo":
        out.update({k: opts[k] for k in ("theta_s1", "theta_s2", "theta_ncc")})
    return out


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _static_imu(opts: dict) -> ImuReading:
    imu_path = _path(opts, "imu")
    if imu_path is None:
        return ImuReading(0.0, math.radians(opts["roll"]), math.radians(opts["pitch"]))
    readings = fmt.read_imu_csv(imu_path)
    if not readings:
        raise CliError(f"{imu_path}: no IMU readings", EXIT_INSUFFICIENT)
    # The boat is static: average the readout to suppress sensor noise.
    return ImuReading(readings[0].timestamp, float(np.mean([r.roll for r in readings])),
                      float(np.mean([r.pitch for r in readings])))


def cmd_calibrate(opts: dict) -> int:
    cloud_path = _path(opts, "cloud")
    try:
        cloud = fmt.load_point_cloud(cloud_path)
    except (OSError, ValueError) as e:
        raise CliError(f"cannot read point cloud {cloud_path}: {e}") from e
    try:
        res = calibrate_camera_imu(cloud, _static_imu(opts), float(opts["dist_threshold"]),
                                   float(opts["inlier_tol"]), int(opts["ransac_iters"]),
                                   int(opts["seed"]), float(opts["min_inlier_ratio"]))
    except InsufficientDataError as e:
        raise CliError(f"{cloud_path}: {e}", EXIT_INSUFFICIENT) from e
    except CalibrationFailedError as e:
        raise CliError(f"{cloud_path}: {e}", EXIT_CALIBRATION) from e
    doc: dict = {}
    base = _path(opts, "base")
    if base is not None:
        doc = fmt.read_json(base)
    doc.update({
        "R_cam_usv": [float(x) for x in res.R_cam_usv.ravel()],
        "R_usv_imu": [float(x) for x in res.R_usv_imu.ravel()],
        "inlier_count": res.inlier_count,
        "residual_rms": res.residual_rms,
    })
    out = _path(opts, "out", Path("calibration.json"))
    fmt.write_json(out, doc)
    log.info("calibration written to %s: %d inliers, residual RMS %.3g m",
             out, res.inlier_count, res.residual_rms)
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

def _load_frame(path: Path, skipped: list, frame: int, camera: str) -> np.ndarray | None:
    try:
        return fmt.read_image(path)
    except Exception as e:  # any decoder failure means the frame is unusable
        log.warning("frame %d (%s): cannot read %s: %s; skipped", frame, camera, path, e)
        skipped.append({"frame": frame, "camera": camera, "path": str(path), "error": str(e)})
        return None


def _edge_points(edge) -> list[list[float]]:
    return fmt.edge_polyline(edge.rows, edge.valid)


def _mono_entry(frame: int, camera: str, res) -> dict:
    return {"frame": frame, "camera": camera, "boxes": [list(d.box) for d in res.detections],
            "edge": _edge_points(res.edge)}


def _stereo_entry(frame: int, camera: str, res, verified) -> dict:
    return {"frame": frame, "camera": camera,
            "boxes": [list(v.detection.box) for v in verified],
            "pair_id": [v.pair_id for v in verified],
            "ncc_peak": [round(float(v.ncc_peak), 6) for v in verified],
            "rescued": [v.rescued for v in verified],
            "edge": _edge_points(res.edge)}


def _diag(res, carried) -> dict:
    return {"iterations": res.iterations, "warm_started": res.warm_started,
            "carried_model": carried, "fitted_model": model_fingerprint(res.model),
            "timings_ms": {k: round(v, 3) for k, v in res.timings.items()}}


def run_detect(opts: dict) -> tuple[dict, dict]:
    """Run the detector over a dataset directory; returns (detections, diagnostics)."""
    mode = opts["mode"]
    if mode not in ("mono", "stereo"):
        raise CliError(f"unknown mode {mode!r}", EXIT_USAGE)
    data = _path(opts, "data", Path("."))
    left_dir = _path(opts, "left", data / "left")
    right_dir = _path(opts, "right", data / "right")
    imu_path = _path(opts, "imu", data / "imu.csv")
    calib_path = _path(opts, "calibration", data / "calibration.json")
    seg, dcfg, vcfg = pipeline_configs(opts)
    detections = {"mode": mode, "params": _params(opts), "detections": []}
    diagnostics: dict = {"mode": mode, "frames": [], "skipped": []}

    left = fmt.list_frames(left_dir)
    right = fmt.list_frames(right_dir) if mode == "stereo" else []
    if not left:
        log.info("0 frames found in %s; nothing to do", left_dir)
        detections["n_frames"] = 0
        diagnostics["n_frames"] = 0
        return detections, diagnostics
    if mode == "stereo" and [i for i, _ in left] != [i for i, _ in right]:
        raise CliError(f"left/right frame mismatch: {len(left)} left vs {len(right)} right frames")
    imu: list[ImuReading | None]
    if seg.use_imu:
        try:
            readings = fmt.read_imu_csv(imu_path)
        except OSError as e:
            raise CliError(f"cannot read IMU log {imu_path}: {e}") from e
        if len(readings) != len(left):
            raise CliError(f"frame/IMU count mismatch: {len(left)} frames vs {len(readings)} IMU rows")
        imu = list(readings)
    else:
        imu = [None] * len(left)
    try:
        rig = fmt.read_calibration(calib_path)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read calibration {calib_path}: {e}") from e

    detections["image_size"] = [rig.intrinsics.width, rig.intrinsics.height]
    warm = not opts["no_warm_start"]
    if mode == "stereo":
        det = StereoDetector(rig.intrinsics, rig.stereo_geometry(), rig.calibration, seg, dcfg, vcfg, warm)
    else:
        det = MonoDetector(rig.intrinsics, rig.calibration, seg, dcfg, "left", warm)

    skipped = diagnostics["skipped"]
    for k, (idx, lpath) in enumerate(left):
        img_l = _load_frame(lpath, skipped, idx, "left")
        img_r = _load_frame(right[k][1], skipped, idx, "right") if mode == "stereo" else None
        if img_l is None or (mode == "stereo" and img_r is None):
            continue
        try:
            if mode == "stereo":
                carried = (model_fingerprint(det.left.previous), model_fingerprint(det.right.previous))
                r = det.process(img_l, img_r, imu[k])
                detections["detections"] += [_stereo_entry(idx, "left", r.left, r.stereo.left),
                                             _stereo_entry(idx, "right", r.right, r.stereo.right)]
                diagnostics["frames"].append({
                    "frame": idx, "left": _diag(r.left, carried[0]), "right": _diag(r.right, carried[1]),
                    "timings_ms": {k2: round(v, 3) for k2, v in r.timings.items()},
                    "n_pairs": r.stereo.n_pairs, "degenerate": r.stereo.degenerate,
                    "discarded": [{"camera": cam, "box": list(o.detection.box), "reason": o.reason}
                                  for cam, o in r.stereo.discarded]})
            else:
                carried = model_fingerprint(det.previous)
                r = det.process(img_l, imu[k])
                detections["detections"].append(_mono_entry(idx, "left", r))
                diagnostics["frames"].append({"frame": idx, **_diag(r, carried)})
        except ValueError as e:
            log.warning("frame %d: %s; skipped", idx, e)
            skipped.append({"frame": idx, "error": str(e)})
    n_done = len(diagnostics["frames"])
    detections["n_frames"] = n_done
    diagnostics["n_frames"] = n_done
    log.info("%s detection: %d frame(s) processed, %d skipped", mode, n_done, len(skipped))
    return detections, diagnostics


def cmd_detect(opts: dict) -> int:
    detections, diagnostics = run_detect(opts)
    out = _path(opts, "out", Path("detections"))
    out.mkdir(parents=True, exist_ok=True)
    fmt.write_json(out / "detections.json", detections)
    fmt.write_json(out / "diagnostics.json", diagnostics)
    log.info("wrote %s and %s", out / "detections.json", out / "diagnostics.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def scene_from_options(opts: dict):
    from . import synth

    n = int(opts["frames"])
    if n < 0:
        raise CliError("--frames must be non-negative", EXIT_USAGE)
    intr = synth.default_intrinsics(int(opts["width"]), int(opts["height"]))
    rolls, pitches = synth.sinusoidal_motion(n, math.radians(opts["roll_amp"]),
                                             math.radians(opts["pitch_amp"]), float(opts["period"]))
    rng = np.random.default_rng(int(opts["seed"]))
    obstacles = synth.random_obstacles(rng, int(opts["obstacles"]))
    return synth.SceneSpec(
        intrinsics=intr, rolls=rolls, pitches=pitches, baseline=float(opts["baseline"]),
        camera_height=float(opts["camera_height"]),
        shore_distance=None if opts["open_sea"] else 250.0, obstacles=obstacles,
        glitter=synth.GlitterSpec(count=int(opts["glitter"])),
        reflection=synth.ReflectionSpec(enabled=bool(opts["reflection"])), seed=int(opts["seed"]))


def cmd_synth(opts: dict) -> int:
    from .synth import render_sequence

    spec = scene_from_options(opts)
    out = _path(opts, "out", Path("synthetic"))
    t0 = time.perf_counter()
    seq = render_sequence(spec)
    fmt.write_dataset(seq, out)
    log.info("rendered %d stereo frame(s) with %d obstacle(s) into %s in %.1f s",
             seq.n_frames, len(spec.obstacles), out, time.perf_counter() - t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def run_eval(opts: dict):
    det_path = _path(opts, "detections")
    try:
        doc = fmt.validate_detections(fmt.read_json(det_path))
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read detections {det_path}: {e}") from e
    camera = opts["camera"]
    ann_dir = _path(opts, "annotations", det_path.parent / "annotations") / camera
    annotated = fmt.list_frames(ann_dir, ".json")
    if not annotated:
        raise CliError(f"no annotations found in {ann_dir}")
    preds = fmt.detections_by_frame(doc, camera)
    scores, bad = [], []
    for idx, path in annotated:
        try:
            ann = fmt.read_annotation(path)
        except InvalidInputError as e:
            log.error("%s", e)
            bad.append(str(path))
            continue
        width, height = _image_size(opts, ann, doc)
        gt = fmt.annotation_boxes(ann)
        p = preds.get(idx)
        if p is None:
            log.warning("frame %d has no detections entry; scored as all misses", idx)
            scores.append(score_frame(idx, [], gt, None, None, width, height, float(opts["iou"])))
            continue
        pe = resample_polyline(p["edge"], width) if p.get("edge") else None
        scores.append(score_frame(idx, p["boxes"], gt, pe, ann["edge"] or None, width, height,
                                  float(opts["iou"])))
    if bad:
        raise CliError(f"{len(bad)} unparseable annotation file(s): {', '.join(bad)}")
    extra = sorted(set(preds) - {i for i, _ in annotated})
    if extra:
        log.warning("%d detection frame(s) have no annotation and were ignored", len(extra))
    name = opts.get("name") or f"{doc['mode']}-{camera}"
    return aggregate(scores, name), scores


def _image_size(opts: dict, ann: dict, doc: dict) -> tuple[int, int]:
    """Image size for edge scoring: flags, else the annotation, else the detections file."""
    size = ann.get("image_size") or doc.get("image_size")
    w = opts.get("eval_width") or (size[0] if size else None)
    h = opts.get("eval_height") or (size[1] if size else None)
    if w is None or h is None:
        raise CliError("image size unknown: pass --eval-width and --eval-height", EXIT_USAGE)
    return int(w), int(h)


def cmd_eval(opts: dict) -> int:
    report, scores = run_eval(opts)
    out = _path(opts, "out")
    doc = {"report": report.to_dict(),
           "frames": [{"frame": s.frame, "edge_rmse": s.edge_rmse, "tp": s.tp, "fp": s.fp, "fn": s.fn}
                      for s in scores]}
    table = reports_csv([report])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fmt.write_json(out / "report.json", doc)
        (out / "report.csv").write_text(table)
        log.info("wrote %s and %s", out / "report.json", out / "report.csv")
    sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _stats(xs: Sequence[float]) -> dict:
    med = statistics.median(xs)
    mean = statistics.fmean(xs)
    return {"mean_ms": round(mean, 3), "median_ms": round(med, 3),
            "fps": round(1000.0 / mean, 2) if mean > 0 else None}


def run_bench(opts: dict) -> dict:
    """Time the mono and stereo pipelines on rendered frames (not written to disk)."""
    from .synth import render_frame, _pixel_rays

    spec = scene_from_options(opts)
    seg, dcfg, vcfg = pipeline_configs(opts)
    warm = not opts["no_warm_start"]
    mono = MonoDetector(spec.intrinsics, spec.calibration, seg, dcfg, "left", warm)
    stereo = StereoDetector(spec.intrinsics, spec.stereo_geometry(), spec.calibration, seg, dcfg, vcfg, warm)
    rays = _pixel_rays(spec.intrinsics)
    rows: dict[str, list[float]] = {k: [] for k in (
        "mono segmentation", "mono detection", "mono total",
        "stereo segmentation", "stereo verification", "stereo total")}
    for i in range(spec.n_frames):
        left, right, truth, _ = render_frame(spec, i, rays)
        imu = truth.imu if seg.use_imu else None
        t0 = time.perf_counter()
        m = mono.process(left, imu)
        t1 = time.perf_counter()
        s = stereo.process(left, right, imu)
        t2 = time.perf_counter()
        rows["mono segmentation"].append(m.timings["segmentation_ms"])
        rows["mono detection"].append(m.timings["detection_ms"])
        rows["mono total"].append(1e3 * (t1 - t0))
        rows["stereo segmentation"].append(s.timings["segmentation_ms"])
        rows["stereo verification"].append(s.timings["verification_ms"])
        rows["stereo total"].append(1e3 * (t2 - t1))
    return {"frames": spec.n_frames, "size": [spec.intrinsics.width, spec.intrinsics.height],
            "stages": {k: _stats(v) for k, v in rows.items() if v}}


def cmd_bench(opts: dict) -> int:
    res = run_bench(opts)
    if res["frames"] == 0:
        log.info("0 frames; nothing to time")
        return EXIT_OK
    w, h = res["size"]
    print(f"{res['frames']} frame(s) at {w}x{h}")
    print(f"{'stage':<22}{'dt [ms]':>10}{'median':>10}{'w [fps]':>10}")
    for name, st in res["stages"].items():
        print(f"{name:<22}{st['mean_ms']:>10.1f}{st['median_ms']:>10.1f}{st['fps']:>10.1f}")
    out = _path(opts, "out")
    if out is not None:
        fmt.write_json(out, res)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marineseg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="camera-IMU calibration from a ground point cloud")
    _common(c)
    c.add_argument("--cloud", type=Path, help="(N, 3) camera-frame points, .npy or text")
    c.add_argument("--imu", type=Path, help="IMU CSV recorded while static (averaged)")
    c.add_argument("--roll", type=float, help="static roll in degrees when no IMU CSV is given")
    c.add_argument("--pitch", type=float, help="static pitch in degrees when no IMU CSV is given")
    c.add_argument("--base", type=Path, help="existing calibration.json to update (keeps intrinsics)")
    c.add_argument("--dist-threshold", type=float)
    c.add_argument("--inlier-tol", type=float)
    c.add_argument("--ransac-iters", type=int)
    c.add_argument("--min-inlier-ratio", type=float)
    c.add_argument("--seed", type=int)
    c.add_argument("--out", type=Path)

    d = sub.add_parser("detect", help="run the obstacle detector over a dataset directory")
    _common(d)
    d.add_argument("--mode", choices=("mono", "stereo"))
    d.add_argument("--data", type=Path, help="dataset root (left/, right/, imu.csv, calibration.json)")
    d.add_argument("--left", type=Path)
    d.add_argument("--right", type=Path)
    d.add_argument("--imu", type=Path)
    d.add_argument("--calibration", type=Path)
    d.add_argument("--out", type=Path, help="output directory")
    _segmentation_options(d)

    s = sub.add_parser("synth", help="render a synthetic stereo sequence with ground truth")
    _common(s)
    _scene_options(s)
    s.add_argument("--camera-height", type=float)
    s.add_argument("--out", type=Path, help="output directory")

    e = sub.add_parser("eval", help="score detections against annotations")
    _common(e)
    e.add_argument("--detections", type=Path)
    e.add_argument("--annotations", type=Path, help="annotation root containing left/ and right/")
    e.add_argument("--camera", choices=("left", "right"))
    e.add_argument("--iou", type=float)
    e.add_argument("--eval-width", type=int, help="image width (default: from the annotations)")
    e.add_argument("--eval-height", type=int, help="image height normalising the edge error")
    e.add_argument("--name")
    e.add_argument("--out", type=Path, help="directory for report.json and report.csv")

    b = sub.add_parser("bench", help="per-stage timings (dt in ms, w in frames per second)")
    _common(b)
    _scene_options(b)
    _segmentation_options(b)
    b.add_argument("--out", type=Path, help="write the timings as JSON")
    return p


def _scene_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scene")
    g.add_argument("--frames", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--obstacles", type=int)
    g.add_argument("--glitter", type=int, help="sun-glitter speckles per view and frame")
    g.add_argument("--reflection", action="store_true", default=None)
    g.add_argument("--open-sea", action="store_true", default=None, help="no shoreline")
    g.add_argument("--roll-amp", type=float, help="roll amplitude in degrees")
    g.add_argument("--pitch-amp", type=float, help="pitch amplitude in degrees")
    g.add_argument("--period", type=float, help="motion period in frames")
    g.add_argument("--baseline", type=float, help="stereo baseline (m)")
    g.add_argument("--seed", type=int)


COMMANDS = {"calibrate": cmd_calibrate, "detect": cmd_detect, "synth": cmd_synth,
            "eval": cmd_eval, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        if args.command == "calibrate" and opts.get("cloud") is None:
            raise CliError("calibrate needs --cloud", EXIT_USAGE)
        if args.command == "eval" and opts.get("detections") is None:
            raise CliError("eval needs --detections", EXIT_USAGE)
        return COMMANDS[args.command](opts)
    except CliError as e:
        log.error("%s", e)
        return e.code
    except InvalidInputError as e:
        log.error("%s", e)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
