import json
import time

import numpy as np
import pytest

from movex.detectors import (DeterministicChannel, Detector, DetectorRequest, DetectorResponse,
                             DetectorSpec, FileOracle, FileOracleSpec, FixedFrames, FixedWallClock,
                             PerRequestSchedule, ScriptedMock, ScriptedMockSpec, ThreadedChannel,
                             detect, latency_frames)
from movex.errors import ConfigError
from movex.frames import Frame
from movex.motfile import read_det
from movex.propagation import Detection, DetectionSet

DET_TXT = """\
1,-1,10,20,30,40,0.9,-1,-1,-1
1,-1,50,60,10,10,0.3,-1,-1,-1
2,-1,11,21,30,40,0.8,-1,-1,-1
4,-1,5.5,6.25,7,8,1,-1,-1,-1
"""


def frame(i):
    return Frame(i, np.zeros((8, 8), dtype=np.uint8))


@pytest.fixture
def det_file(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text(DET_TXT)
    return p


def test_oracle_echoes_file(det_file):
    oracle = FileOracle.from_file(det_file)
    out = oracle(frame(0))  # file frame 1
    assert out.frame_index == 0
    assert out.detections == (Detection(10, 20, 30, 40, 0.9), Detection(50, 60, 10, 10, 0.3))
    assert oracle(frame(2)).detections == ()  # absent frame -> empty set
    assert oracle(frame(3)).detections == (Detection(5.5, 6.25, 7, 8, 1.0),)


def test_oracle_threshold(det_file):
    assert FileOracle.from_file(det_file, 0.5)(frame(0)).detections == (Detection(10, 20, 30, 40, 0.9),)
    high = FileOracle.from_file(det_file, 1.1)
    assert all(len(high(frame(i))) == 0 for i in range(5))


def test_oracle_fidelity(det_file):
    table = read_det(det_file)
    oracle = FileOracle.from_file(det_file)
    for i, ds in table.items():
        assert oracle(frame(i)) == ds


def test_bad_det_file_is_config_error(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,10,20\n")
    with pytest.raises(ConfigError):
        FileOracle.from_file(p)
    with pytest.raises(ConfigError):
        DetectorSpec(FileOracleSpec(str(tmp_path / "missing.txt"))).build()


def test_scripted_mock(tmp_path):
    p = tmp_path / "mock.json"
    p.write_text(json.dumps({"frames": {"2": [[1, 2, 3, 4, 0.5, 7]], "0": [[0, 0, 1, 1]]}}))
    mock = DetectorSpec(ScriptedMockSpec(str(p))).build()
    assert mock(frame(2)).detections == (Detection(1, 2, 3, 4, 0.5, 7),)
    assert mock(frame(0)).detections == (Detection(0, 0, 1, 1),)
    assert mock(frame(1)).detections == ()
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ScriptedMock.from_file(p)


def test_preprocess_is_identity():
    d = ScriptedMock({})
    f = Frame(3, np.arange(12, dtype=np.uint8).reshape(3, 4))
    once = d.preprocess_image(f)
    assert once == f and (once.width, once.height) == (4, 3)
    assert d.preprocess_image(once) == once


def test_response_tagging():
    resp = detect(DetectorRequest(frame(7)), ScriptedMock({}))
    assert resp.frame_index == 7 and resp.detections.frame_index == 7
    with pytest.raises(ValueError):
        DetectorResponse(3, DetectionSet(4), 0.0)


def test_latency_models():
    assert latency_frames(FixedFrames(5), 0, 30) == 5
    assert latency_frames(FixedWallClock(100), 0, 30) == 3
    assert latency_frames(FixedWallClock(0), 0, 30) == 0
    sched = PerRequestSchedule((10, 70))
    assert [latency_frames(sched, k, 30) for k in range(4)] == [1, 3, 1, 3]
    with pytest.raises(ConfigError):
        FixedFrames(-1)
    with pytest.raises(ConfigError):
        PerRequestSchedule(())


def test_schedule_file(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("5\n10, 15\n")
    assert PerRequestSchedule.from_file(p).ms == (5.0, 10.0, 15.0)


def test_deterministic_channel_frame_latency():
    ch = DeterministicChannel(ScriptedMock({10: [Detection(0, 0, 1, 1)]}), FixedFrames(5))
    ch.submit(DetectorRequest(frame(10)), at_frame=10)
    for f in range(10, 15):
        assert ch.poll(f) is None
    resp = ch.poll(15)
    assert resp.frame_index == 10 and len(resp.detections) == 1
    assert ch.poll(16) is None


def test_single_inflight():
    ch = DeterministicChannel(ScriptedMock({}), FixedFrames(2))
    ch.submit(DetectorRequest(frame(0)), 0)
    with pytest.raises(ValueError):
        ch.submit(DetectorRequest(frame(1)), 1)


def test_threaded_channel_wall_clock():
    with ThreadedChannel(ScriptedMock({}), FixedWallClock(30)) as ch:
        t0 = time.perf_counter()
        ch.submit(DetectorRequest(frame(4)), 4)
        assert ch.poll(4) is None
        resp = ch.wait()
        assert time.perf_counter() - t0 >= 0.03
        assert resp.frame_index == 4 and resp.latency >= 0.03


def test_threaded_channel_frame_latency_matches_deterministic():
    with ThreadedChannel(ScriptedMock({}), FixedFrames(3)) as ch:
        ch.submit(DetectorRequest(frame(2)), 2)
        assert ch.poll(3) is None and ch.poll(4) is None
        assert ch.poll(5).frame_index == 2


def test_detector_errors_surface_from_channels():
    class Broken(Detector):
        def infer(self, img):
            raise RuntimeError("model exploded")

    from movex.detectors import DetectorFailure

    for cls in (DeterministicChannel, ThreadedChannel):
        ch = cls(Broken(), FixedFrames(0))
        ch.submit(DetectorRequest(frame(1)), 1)
        with pytest.raises(DetectorFailure, match="model exploded"):
            ch.wait()
        ch.close()
