import filecmp
import json
import math

import numpy as np
import pytest

from marineseg import formats as fmt
from marineseg.cli import main
from marineseg.evaluation import iou
from marineseg.exceptions import InvalidInputError
from marineseg.geometry import CalibrationResult, ImuReading, rot_x, rot_z
from marineseg.synth import ObstacleSpec, SceneSpec, default_intrinsics, ground_point_cloud, render_sequence


def run(*argv):
    return main([str(a) for a in argv])


# -- file formats ------------------------------------------------------------------

def test_imu_csv_round_trip(tmp_path):
    readings = [ImuReading(0.1 * i, 0.01 * i, -0.02 * i, 0.5) for i in range(5)]
    fmt.write_imu_csv(tmp_path / "imu.csv", readings)
    back = fmt.read_imu_csv(tmp_path / "imu.csv")
    assert [(r.timestamp, r.roll, r.pitch, r.yaw) for r in back] == \
        [(r.timestamp, r.roll, r.pitch, r.yaw) for r in readings]


def test_imu_csv_bad_row(tmp_path):
    (tmp_path / "imu.csv").write_text("frame,timestamp,roll,pitch,yaw\n0,0.0,abc,0,0\n")
    with pytest.raises(InvalidInputError):
        fmt.read_imu_csv(tmp_path / "imu.csv")


def test_calibration_round_trip(tmp_path):
    rig = fmt.RigCalibration(default_intrinsics(640, 480),
                             CalibrationResult(rot_x(0.1), rot_z(0.2), 42, 0.01),
                             np.eye(3), np.array([-0.3, 0.0, 0.0]))
    fmt.write_calibration(tmp_path / "c.json", rig)
    back = fmt.read_calibration(tmp_path / "c.json")
    assert back.to_dict() == rig.to_dict()
    assert back.has_stereo and np.allclose(back.calibration.R_cam_usv, rot_x(0.1))


def test_image_round_trip_and_listing(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (12, 16, 3), dtype=np.uint8)
    for i in (3, 1, 12):
        fmt.write_image(tmp_path / fmt.frame_name(i), img)
    (tmp_path / "notes.png.txt").write_text("x")
    assert [i for i, _ in fmt.list_frames(tmp_path)] == [1, 3, 12]
    assert np.array_equal(fmt.read_image(tmp_path / fmt.frame_name(3)), img)


def test_point_cloud_text_with_header(tmp_path):
    (tmp_path / "c.csv").write_text("x,y,z\n1,2,3\n4,5,6\n")
    assert fmt.load_point_cloud(tmp_path / "c.csv").tolist() == [[1, 2, 3], [4, 5, 6]]


def test_annotation_validation():
    good = {"frame": 0, "edge": [[0, 5], [9, 5]], "large_obstacles": [[1, 1, 2, 2]],
            "small_obstacles": []}
    assert fmt.annotation_boxes(fmt.validate_annotation(good)) == [[1, 1, 2, 2]]
    with pytest.raises(InvalidInputError):
        fmt.validate_annotation({**good, "large_obstacles": [[1, 1, -2, 2]]})
    with pytest.raises(InvalidInputError):
        fmt.validate_detections({"mode": "mono"})


# -- calibrate ------------------------------------------------------------------------

def test_calibrate_recovers_plane(tmp_path):
    np.save(tmp_path / "cloud.npy", ground_point_cloud(noise=0.0, n_points=500))
    assert run("calibrate", "-q", "--cloud", tmp_path / "cloud.npy", "--out", tmp_path / "c.json") == 0
    doc = fmt.read_json(tmp_path / "c.json")
    assert doc["residual_rms"] < 1e-3
    assert np.allclose(np.reshape(doc["R_cam_usv"], (3, 3)), np.eye(3), atol=1e-6)


def test_calibrate_with_outliers(tmp_path):
    R = rot_x(math.radians(5))
    np.save(tmp_path / "cloud.npy", ground_point_cloud(R, outlier_fraction=0.3, seed=4))
    assert run("calibrate", "-q", "--cloud", tmp_path / "cloud.npy", "--out", tmp_path / "c.json") == 0
    got = np.reshape(fmt.read_json(tmp_path / "c.json")["R_cam_usv"], (3, 3))
    # only the water-plane normal is observable
    n_true, n_got = R @ [0, 1, 0], got @ [0, 1, 0]
    assert math.degrees(math.acos(min(1.0, abs(n_true @ n_got)))) < 0.5


def test_calibrate_exit_codes(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    assert run("calibrate", "-q", "--cloud", tmp_path / "empty.csv", "--out", tmp_path / "c.json") == 3
    blob = np.random.default_rng(0).uniform(-3, 3, (500, 3)) + [0, 0, 5]
    np.save(tmp_path / "blob.npy", blob)
    assert run("calibrate", "-q", "--cloud", tmp_path / "blob.npy", "--inlier-tol", 0.05,
               "--out", tmp_path / "c.json") == 4
    assert run("calibrate", "-q", "--cloud", tmp_path / "missing.npy") == 5
    with pytest.raises(SystemExit) as e:
        run("calibrate", "--no-such-flag")
    assert e.value.code == 2


# -- synth ------------------------------------------------------------------------------

def test_synth_is_byte_identical(tmp_path):
    args = ["synth", "-q", "--frames", 2, "--width", 160, "--height", 120, "--glitter", 3, "--seed", 5]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    files = ["imu.csv", "calibration.json", "left/000000.png", "right/000001.png",
             "annotations/left/000001.json"]
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)
    assert mismatch == [] and errors == [] and not cmp.left_only


def test_synth_annotations(tmp_path):
    assert run("synth", "-q", "--frames", 1, "--width", 320, "--height", 240, "--obstacles", 3,
               "--out", tmp_path) == 0
    ann = fmt.read_annotation(tmp_path / "annotations" / "left" / "000000.json")
    assert len(ann["obstacles"]) == 3
    assert ann["image_size"] == [320, 240]
    rig = fmt.read_calibration(tmp_path / "calibration.json")
    right = {o["id"]: o for o in fmt.read_json(tmp_path / "annotations" / "right" / "000000.json")["obstacles"]}
    for o in ann["obstacles"]:
        assert o["disparity"] > 0
        assert abs((o["box"][0] - right[o["id"]]["box"][0]) - o["disparity"]) <= 1.5
    assert rig.stereo_t[0] == pytest.approx(-0.3)


# -- detect and eval ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def sequence50(tmp_path_factory):
    """50 stereo frames at 640x480 with three obstacles and sun glitter."""
    root = tmp_path_factory.mktemp("seq50")
    assert run("synth", "-q", "--frames", 50, "--width", 640, "--height", 480, "--obstacles", 3,
               "--glitter", 5, "--seed", 1, "--out", root / "data") == 0
    assert run("detect", "-q", "--mode", "stereo", "--data", root / "data", "--out", root / "stereo") == 0
    assert run("detect", "-q", "--mode", "mono", "--data", root / "data", "--out", root / "mono") == 0
    return root


def count_hits(root, run_dir):
    doc = fmt.read_json(root / run_dir / "detections.json")
    preds = fmt.detections_by_frame(doc, "left")
    hits, fp = {}, 0
    for idx, path in fmt.list_frames(root / "data" / "annotations" / "left", ".json"):
        ann = fmt.read_annotation(path)
        boxes = preds.get(idx, {"boxes": []})["boxes"]
        for ob in ann["obstacles"]:
            hits[ob["id"]] = hits.get(ob["id"], 0) + any(iou(b, ob["box"]) >= 0.3 for b in boxes)
        fp += sum(not any(iou(b, ob["box"]) >= 0.3 for ob in ann["obstacles"]) for b in boxes)
    return hits, fp


@pytest.mark.slow
def test_stereo_confirms_every_obstacle(sequence50):
    hits, fp_stereo = count_hits(sequence50, "stereo")
    assert len(hits) == 3 and min(hits.values()) >= 45
    _, fp_mono = count_hits(sequence50, "mono")
    assert fp_mono > fp_stereo


@pytest.mark.slow
def test_detect_outputs_are_consistent(sequence50):
    doc = fmt.validate_detections(fmt.read_json(sequence50 / "stereo" / "detections.json"))
    assert doc["n_frames"] == 50 and len(doc["detections"]) == 100
    diag = fmt.read_json(sequence50 / "stereo" / "diagnostics.json")
    frames = diag["frames"]
    assert not frames[0]["left"]["warm_started"]
    assert all(f["left"]["warm_started"] and f["right"]["warm_started"] for f in frames[1:])
    # the model carried into frame k is the one fitted on frame k-1
    for a, b in zip(frames, frames[1:]):
        assert b["left"]["carried_model"] == a["left"]["fitted_model"]


@pytest.mark.slow
def test_eval_reports(sequence50, tmp_path, capsys):
    assert run("eval", "-q", "--detections", sequence50 / "stereo" / "detections.json",
               "--annotations", sequence50 / "data" / "annotations", "--out", tmp_path) == 0
    report = fmt.read_json(tmp_path / "report.json")["report"]
    assert report["f_score"] > 0.9 and report["mu_edg"] < 0.05
    assert (tmp_path / "report.csv").read_text().startswith("method,")
    assert "F-score" in capsys.readouterr().out


@pytest.fixture
def small_dataset(tmp_path):
    spec = SceneSpec(default_intrinsics(160, 120), rolls=(0.0, 0.01, 0.02),
                     obstacles=[ObstacleSpec(0.3, 4.0)], seed=2)
    fmt.write_dataset(render_sequence(spec), tmp_path / "data")
    return tmp_path


def test_detect_is_byte_identical(small_dataset):
    d = small_dataset
    for out in ("a", "b"):
        assert run("detect", "-q", "--mode", "stereo", "--data", d / "data", "--out", d / out) == 0
    assert (d / "a" / "detections.json").read_bytes() == (d / "b" / "detections.json").read_bytes()


def test_detect_zero_frames(tmp_path):
    (tmp_path / "left").mkdir()
    assert run("detect", "-q", "--data", tmp_path, "--out", tmp_path / "out") == 0
    assert fmt.read_json(tmp_path / "out" / "detections.json")["detections"] == []


def test_detect_imu_count_mismatch(small_dataset):
    d = small_dataset / "data"
    lines = (d / "imu.csv").read_text().splitlines()
    (d / "imu.csv").write_text("\n".join(lines[:-1]) + "\n")
    assert run("detect", "-q", "--data", d, "--out", small_dataset / "out") == 5


def test_detect_left_right_mismatch(small_dataset):
    d = small_dataset / "data"
    (d / "right" / "000002.png").unlink()
    assert run("detect", "-q", "--mode", "stereo", "--data", d, "--out", small_dataset / "out") == 5


def test_detect_skips_unreadable_frame(small_dataset):
    d = small_dataset / "data"
    (d / "left" / "000001.png").write_bytes(b"not a png")
    assert run("detect", "-q", "--data", d, "--out", small_dataset / "out") == 0
    diag = fmt.read_json(small_dataset / "out" / "diagnostics.json")
    assert [s["frame"] for s in diag["skipped"]] == [1]
    assert [f["frame"] for f in diag["frames"]] == [0, 2]
    assert diag["frames"][1]["warm_started"]


def test_eval_rejects_broken_annotation(small_dataset):
    d = small_dataset
    assert run("detect", "-q", "--data", d / "data", "--out", d / "out") == 0
    (d / "data" / "annotations" / "left" / "000001.json").write_text("{broken")
    assert run("eval", "-q", "--detections", d / "out" / "detections.json",
               "--annotations", d / "data" / "annotations") == 5


def test_config_file_precedence(small_dataset):
    d = small_dataset
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps({"max-iters": 3, "min_area": 40}))
    assert run("detect", "-q", "--config", cfg, "--min-area", 30, "--data", d / "data",
               "--out", d / "out") == 0
    params = fmt.read_json(d / "out" / "detections.json")["params"]
    assert params["max_iters"] == 3 and params["min_area"] == 30 and params["merge_dist"] == 10.0


def test_bench_writes_timings(tmp_path, capsys):
    assert run("bench", "-q", "--frames", 2, "--width", 160, "--height", 120,
               "--out", tmp_path / "b.json") == 0
    res = fmt.read_json(tmp_path / "b.json")
    assert set(res["stages"]) >= {"mono total", "stereo total"}
    assert "w [fps]" in capsys.readouterr().out
