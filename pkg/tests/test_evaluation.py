import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_ap
from movex.detectors import FileOracle, FixedFrames
from movex.errors import InvalidInputError, ParseError
from movex.evaluation import GroundTruth, GTBox, average_precision, hold_last_baseline, iou
from movex.frames import Frame
from movex.motfile import format_det, read_det, read_gt, write_det
from movex.propagation import Detection, DetectionSet


def test_iou_examples():
    assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert iou((0, 0, 10, 10), (20, 0, 10, 10)) == 0.0
    assert iou((0, 0, 10, 10), (10, 0, 10, 10)) == 0.0
    assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3)
    with pytest.raises(InvalidInputError):
        iou((0, 0, 0, 10), (0, 0, 1, 1))


def one_gt():
    return GroundTruth(1, {0: (GTBox(0, 0, 10, 10),)})


def test_perfect_predictions():
    gt = GroundTruth(3, {0: (GTBox(0, 0, 10, 10), GTBox(20, 20, 5, 5)), 2: (GTBox(1, 1, 4, 4),)})
    preds = {f: DetectionSet(f, tuple(Detection(*b.box, 1.0) for b in gt.frame(f))) for f in range(3)}
    rep = average_precision(preds, gt)
    assert rep.ap == 1.0 and (rep.tp, rep.fp, rep.num_gt) == (3, 0, 3)


def test_no_predictions():
    assert average_precision({}, one_gt()).ap == 0.0


def test_hand_computed_two_predictions():
    hit, miss = (0, 0, 10, 10), (50, 50, 10, 10)
    good_first = [DetectionSet(0, (Detection(*hit, 0.9), Detection(*miss, 0.8)))]
    assert average_precision(good_first, one_gt()).ap == 1.0
    bad_first = [DetectionSet(0, (Detection(*hit, 0.8), Detection(*miss, 0.9)))]
    rep = average_precision(bad_first, one_gt())
    assert rep.ap == 0.5
    assert rep.curve == [(0.0, 0.0), (1.0, 0.5)]


def test_one_gt_never_matched_twice():
    preds = [DetectionSet(0, (Detection(0, 0, 10, 10, 0.9), Detection(0, 0, 10, 10, 0.8)))]
    rep = average_precision(preds, one_gt())
    assert (rep.tp, rep.fp) == (1, 1)


def test_highest_iou_match_wins():
    gt = GroundTruth(1, {0: (GTBox(0, 0, 10, 10), GTBox(2, 0, 10, 10))})
    # the first prediction overlaps gt[1] best; the second can then still take gt[0]
    preds = [DetectionSet(0, (Detection(2, 0, 10, 10, 0.9), Detection(0, 0, 10, 10, 0.8)))]
    assert average_precision(preds, gt).tp == 2


def test_ignore_regions_absorb_matches():
    gt = GroundTruth(1, {0: (GTBox(0, 0, 10, 10), GTBox(40, 40, 10, 10, ignore=True))})
    preds = [DetectionSet(0, (Detection(40, 40, 10, 10, 0.95), Detection(41, 40, 10, 10, 0.9),
                              Detection(0, 0, 10, 10, 0.5)))]
    rep = average_precision(preds, gt)
    assert (rep.tp, rep.fp, rep.num_gt) == (1, 0, 1) and rep.ap == 1.0


def test_ties_form_one_cutoff():
    gt = GroundTruth(1, {0: (GTBox(0, 0, 10, 10), GTBox(30, 0, 10, 10))})
    preds = [DetectionSet(0, (Detection(60, 0, 10, 10, 1.0), Detection(0, 0, 10, 10, 1.0)))]
    rep = average_precision(preds, gt)
    assert rep.curve == [(0.5, 0.5)] and rep.ap == 0.25


def test_misaligned_frames():
    with pytest.raises(InvalidInputError):
        average_precision([DetectionSet(4)], GroundTruth(3))
    with pytest.raises(InvalidInputError):
        average_precision([], one_gt(), iou_threshold=0.0)


def test_report_json():
    rep = average_precision([DetectionSet(0, (Detection(0, 0, 10, 10, 0.5),))], one_gt())
    d = json.loads(rep.to_json())
    assert set(d) == {"ap", "iou_threshold", "curve", "tp", "fp", "num_gt"}
    assert d["curve"] == [[1.0, 1.0]] and d["iou_threshold"] == 0.5


def random_case(rng, frames=4):
    gt, preds = {}, {}
    for f in range(frames):
        boxes = [(float(rng.integers(0, 60)), float(rng.integers(0, 60)),
                  float(rng.integers(4, 20)), float(rng.integers(4, 20)), bool(rng.random() < 0.15))
                 for _ in range(int(rng.integers(0, 5)))]
        gt[f] = boxes
        ps = []
        for b in boxes:
            if rng.random() < 0.7:
                j = rng.normal(0, 3, 2)
                ps.append((b[0] + j[0], b[1] + j[1], b[2], b[3], float(rng.choice([0.3, 0.5, 0.7, 0.9]))))
        for _ in range(int(rng.integers(0, 3))):
            ps.append((float(rng.integers(0, 60)), float(rng.integers(0, 60)), 8.0, 8.0,
                       float(rng.choice([0.2, 0.5, 0.8]))))
        preds[f] = ps
    gtruth = GroundTruth(frames, {f: tuple(GTBox(*b[:4], ignore=b[4]) for b in bs) for f, bs in gt.items()})
    dsets = {f: DetectionSet(f, tuple(Detection(*p) for p in ps)) for f, ps in preds.items()}
    return dsets, gtruth, preds, gt


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.3, 0.5, 0.7]))
def test_ap_matches_brute_force(seed, thr):
    dsets, gtruth, preds, gt = random_case(np.random.default_rng(seed))
    assert average_precision(dsets, gtruth, thr).ap == pytest.approx(brute_force_ap(preds, gt, thr), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ap_invariant_to_monotone_rescaling(seed):
    dsets, gtruth, _, _ = random_case(np.random.default_rng(seed))
    squashed = {f: DetectionSet(f, tuple(Detection(d.x, d.y, d.w, d.h, d.score ** 3 / 2) for d in ds))
                for f, ds in dsets.items()}
    assert average_precision(squashed, gtruth).ap == average_precision(dsets, gtruth).ap


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ap_non_increasing_in_threshold(seed):
    dsets, gtruth, _, _ = random_case(np.random.default_rng(seed))
    aps = [average_precision(dsets, gtruth, t).ap for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_recall_non_decreasing(seed):
    dsets, gtruth, _, _ = random_case(np.random.default_rng(seed))
    recalls = [r for r, _ in average_precision(dsets, gtruth).curve]
    assert recalls == sorted(recalls)


# -- hold-last baseline ----------------------------------------------------------

def frames(n):
    return [Frame(i, np.zeros((4, 4), dtype=np.uint8)) for i in range(n)]


def table(n):
    return {i: DetectionSet(i, (Detection(i, 0, 2, 2),)) for i in range(n)}


def test_hold_last_zero_latency_is_detector_output():
    out = hold_last_baseline(frames(10), FileOracle(table(10)), FixedFrames(0))
    assert out == list(table(10).values())


def test_hold_last_repeats_stale_answers():
    out = hold_last_baseline(frames(12), FileOracle(table(12)), FixedFrames(3))
    xs = [ds.detections[0].x for ds in out]
    assert xs == [0, 0, 0, 0, 1, 1, 1, 1, 5, 5, 5, 5]
    assert [ds.frame_index for ds in out] == list(range(12))


# -- MOT det round trip --------------------------------------------------------------

def test_det_round_trip_random():
    rng = np.random.default_rng(99)
    for _ in range(100):
        sets = {}
        for f in sorted(set(rng.integers(0, 50, int(rng.integers(1, 6))).tolist())):
            sets[f] = DetectionSet(f, tuple(
                Detection(float(rng.normal(0, 200)), float(rng.normal(0, 200)),
                          float(rng.uniform(0.01, 300)), float(rng.uniform(0.01, 300)),
                          float(rng.uniform(0, 1)))
                for _ in range(int(rng.integers(1, 5)))))
        buf = io.StringIO()
        write_det(sets, buf)
        assert read_det(io.StringIO(buf.getvalue())) == sets


def test_det_parse_errors():
    with pytest.raises(ParseError) as info:
        read_det(io.StringIO("1,-1,1,2,3,4,0.5\n0,-1,1,2,3,4,0.5\n"))
    assert info.value.lineno == 2
    with pytest.raises(ParseError):
        read_det(io.StringIO("1,-1,1,2,0,4,0.5\n"))
    with pytest.raises(ParseError):
        read_det(io.StringIO("1,-1,1,2,3,4,abc\n"))


def test_gt_ignore_flags():
    gt = read_gt(io.StringIO("1,1,0,0,10,10,1,1,1.0\n1,2,20,20,5,5,0,8,0.3\n3,1,1,1,10,10,1,1,1\n"))
    assert gt.num_frames == 3
    assert [b.ignore for b in gt.frame(0)] == [False, True]
    assert gt.num_scored == 2
    with pytest.raises(InvalidInputError):
        read_gt(io.StringIO("5,1,0,0,10,10,1,1,1\n"), num_frames=3)
