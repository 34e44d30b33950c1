"""Detection accuracy: IoU, greedy matching, all-point average precision, hold-last baseline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .propagation import Detection, DetectionSet

Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class GTBox:
    x: float
    y: float
    w: float
    h: float
    ignore: bool = False
    track_id: int = -1

    @property
    def box(self) -> Box:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class GroundTruth:
    """Ground-truth boxes for frames ``0 .. num_frames-1``; frames without boxes may be absent."""

    num_frames: int
    boxes: Mapping[int, tuple[GTBox, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for fi in self.boxes:
            if not 0 <= fi < self.num_frames:
                raise InvalidInputError(f"ground-truth frame {fi} outside [0, {self.num_frames})")

    def frame(self, index: int) -> tuple[GTBox, ...]:
        return tuple(self.boxes.get(index, ()))

    @property
    def num_scored(self) -> int:
        return sum(1 for bs in self.boxes.values() for b in bs if not b.ignore)


def iou(a: Box | Detection | GTBox, b: Box | Detection | GTBox) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a.box if hasattr(a, "box") else a
    bx, by, bw, bh = b.box if hasattr(b, "box") else b
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise InvalidInputError("iou needs boxes with positive width and height")
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


@dataclass
class APReport:
    ap: float
    iou_threshold: float
    curve: list[tuple[float, float]]  # (recall, precision), one point per score cutoff
    tp: int
    fp: int
    num_gt: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["curve"] = [[r, p] for r, p in self.curve]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_frame_map(preds: Mapping[int, DetectionSet] | Iterable[DetectionSet]) -> dict[int, DetectionSet]:
    if isinstance(preds, Mapping):
        return {int(k): v for k, v in preds.items()}
    out: dict[int, DetectionSet] = {}
    for ds in preds:
        if ds.frame_index in out:
            raise InvalidInputError(f"duplicate predictions for frame {ds.frame_index}")
        out[ds.frame_index] = ds
    return out


def match_detections(preds: Mapping[int, DetectionSet] | Iterable[DetectionSet],
                     gt: GroundTruth, iou_threshold: float = 0.5):
    """Greedy matching in descending-score order.

    Returns ``(ranked, num_gt)`` where ``ranked`` lists ``(score, outcome)``
    with outcome 1 (true positive), 0 (false positive) or None (absorbed by an
    ignore region), in rank order.
    """
    frames = _as_frame_map(preds)
    for fi in frames:
        if not 0 <= fi < gt.num_frames:
            raise InvalidInputError(
                f"prediction frame {fi} outside ground-truth range [0, {gt.num_frames})")
    flat = [(d.score, fi, d) for fi in sorted(frames) for d in frames[fi].detections]
    # Stable sort: equal scores keep frame order, then in-frame order.
    order = sorted(range(len(flat)), key=lambda k: -flat[k][0])
    taken: dict[int, set[int]] = {}
    ranked: list[tuple[float, int | None]] = []
    for k in order:
        score, fi, d = flat[k]
        used = taken.setdefault(fi, set())
        best_j, best_iou = -1, -1.0
        for j, g in enumerate(gt.frame(fi)):
            if j in used:
                continue
            v = iou(d, g)
            if v >= iou_threshold and v > best_iou:
                best_j, best_iou = j, v
        if best_j < 0:
            ranked.append((score, 0))
        elif gt.frame(fi)[best_j].ignore:
            ranked.append((score, None))
        else:
            used.add(best_j)
            ranked.append((score, 1))
    return ranked, gt.num_scored


def average_precision(preds: Mapping[int, DetectionSet] | Iterable[DetectionSet],
                      gt: GroundTruth, iou_threshold: float = 0.5) -> APReport:
    """Area under the all-point interpolated precision/recall curve.

    Detections sharing a score form a single cutoff, so the result depends on
    the score ranking only.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidInputError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    ranked, num_gt = match_detections(preds, gt, iou_threshold)
    scored = [(s, o) for s, o in ranked if o is not None]
    tp = fp = 0
    curve: list[tuple[float, float]] = []
    for k, (score, outcome) in enumerate(scored):
        tp += outcome
        fp += 1 - outcome
        last_of_group = k + 1 == len(scored) or scored[k + 1][0] != score
        if last_of_group:
            recall = tp / num_gt if num_gt else 0.0
            curve.append((recall, tp / (tp + fp)))
    ap = 0.0
    if num_gt and curve:
        precision = np.array([p for _, p in curve])
        recall = np.array([r for r, _ in curve])
        envelope = np.maximum.accumulate(precision[::-1])[::-1]
        steps = np.diff(np.concatenate(([0.0], recall)))
        ap = float(np.sum(steps * envelope))
    return APReport(ap=ap, iou_threshold=iou_threshold, curve=curve, tp=tp, fp=fp, num_gt=num_gt)


def hold_last_baseline(frames, detector, latency, fps: float = 30.0) -> list[DetectionSet]:
    """Per-frame output of the newest detector answer, without any propagation.

    Uses the same request schedule as the pipeline: the first frame blocks for
    its answer, and a new request for the current frame is sent whenever the
    detector is idle.
    """
    from .detectors import DeterministicChannel, DetectorRequest

    channel = DeterministicChannel(detector, latency, fps)
    out: list[DetectionSet] = []
    held: DetectionSet | None = None
    idle = True
    for frame in frames:
        if held is None:
            channel.submit(DetectorRequest(frame), frame.index)
            held = channel.wait().detections
        else:
            if idle:
                channel.submit(DetectorRequest(frame), frame.index)
                idle = False
            resp = channel.poll(frame.index)
            if resp is not None:
                held = resp.detections
                idle = True
        out.append(held.at(frame.index))
    if held is None:
        raise InvalidInputError("hold_last_baseline needs at least one frame")
    return out
