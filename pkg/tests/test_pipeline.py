import numpy as np
import pytest

from marineseg.evaluation import iou
from marineseg.pipeline import (
    DetectionConfig,
    MonoDetector,
    SegmentationConfig,
    StereoDetector,
    model_fingerprint,
)
from marineseg.synth import ObstacleSpec, SceneSpec, default_intrinsics, render_sequence


@pytest.fixture(scope="module")
def seq():
    spec = SceneSpec(default_intrinsics(320, 240), rolls=(0.0, 0.01, 0.02, 0.03),
                     obstacles=[ObstacleSpec(0.0, 4.0)], seed=7)
    return render_sequence(spec)


def test_mono_detector_finds_obstacle(seq):
    mono = MonoDetector(seq.spec.intrinsics, seq.spec.calibration)
    res = mono.process(seq.left[0], seq.imu[0])
    gt = seq.truth[0].boxes["left"][0].box
    assert any(iou(d.box, gt) >= 0.3 for d in res.detections)
    assert res.horizon.valid and not res.warm_started
    assert set(res.timings) == {"segmentation_ms", "detection_ms"}


def test_warm_start_carries_previous_model(seq):
    mono = MonoDetector(seq.spec.intrinsics, seq.spec.calibration)
    first = mono.process(seq.left[0], seq.imu[0])
    assert mono.previous is first.model
    second = mono.process(seq.left[1], seq.imu[1])
    assert second.warm_started
    mono.reset()
    assert not mono.process(seq.left[2], seq.imu[2]).warm_started
    cold = MonoDetector(seq.spec.intrinsics, warm_start=False)
    cold.process(seq.left[0], seq.imu[0])
    assert not cold.process(seq.left[1], seq.imu[1]).warm_started


def test_without_imu_horizon_is_invalid(seq):
    mono = MonoDetector(seq.spec.intrinsics, seg=SegmentationConfig(use_imu=False))
    assert not mono.process(seq.left[0], seq.imu[0]).horizon.valid
    assert not MonoDetector(seq.spec.intrinsics).horizon(None).valid


def test_frame_size_must_match_calibration(seq):
    mono = MonoDetector(default_intrinsics(640, 480))
    with pytest.raises(ValueError):
        mono.process(seq.left[0], seq.imu[0])


def test_stereo_detector_pairs_obstacle(seq):
    st = StereoDetector(seq.spec.intrinsics, seq.spec.stereo_geometry(), seq.spec.calibration,
                        dcfg=DetectionConfig(min_area=25))
    for i in range(seq.n_frames):
        res = st.process(seq.left[i], seq.right[i], seq.imu[i])
        gt = seq.truth[i].boxes["left"][0].box
        assert any(iou(v.detection.box, gt) >= 0.3 and v.pair_id is not None for v in res.stereo.left)
    assert res.left.warm_started and res.right.warm_started
    assert "verification_ms" in res.timings


def test_model_fingerprint(seq):
    assert model_fingerprint(None) is None
    mono = MonoDetector(seq.spec.intrinsics)
    fp = model_fingerprint(mono.process(seq.left[0], seq.imu[0]).model)
    assert len(fp["means"]) == 3 and abs(sum(fp["posterior_mean"]) - 1) < 1e-5
    assert np.isfinite(fp["means"]).all()
