"""Pluggable stand-ins for the object-detection endpoint.

A detector is the two-stage call ``infer(preprocess_image(img))``. Latency is
simulated by the channel that delivers responses, never by the detector
itself, so the same detector runs unchanged in deterministic and real-time
mode.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

from .errors import ConfigError, InvalidInputError, MovexError, ParseError
from .frames import Frame
from .propagation import Detection, DetectionSet

log = logging.getLogger(__name__)


# -- latency models ----------------------------------------------------------

@dataclass(frozen=True)
class FixedFrames:
    frames: int

    def __post_init__(self) -> None:
        if self.frames < 0:
            raise ConfigError(f"frame latency must be >= 0, got {self.frames}")


@dataclass(frozen=True)
class FixedWallClock:
    ms: float

    def __post_init__(self) -> None:
        if self.ms < 0:
            raise ConfigError(f"latency must be >= 0 ms, got {self.ms}")


@dataclass(frozen=True)
class PerRequestSchedule:
    """Latency of request k is ``ms[k % len(ms)]``."""

    ms: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ms", tuple(float(v) for v in self.ms))
        if not self.ms:
            raise ConfigError("latency schedule is empty")
        if any(v < 0 for v in self.ms):
            raise ConfigError("latency schedule has negative entries")

    @classmethod
    def from_file(cls, path: str | Path) -> "PerRequestSchedule":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read latency schedule {path}: {exc.strerror}") from None
        try:
            values = [float(tok) for tok in text.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"latency schedule {path} has non-numeric entries") from None
        return cls(tuple(values))


LatencyModel = Union[FixedFrames, FixedWallClock, PerRequestSchedule]


def latency_seconds(model: LatencyModel, request_number: int) -> float:
    if isinstance(model, FixedFrames):
        return 0.0
    if isinstance(model, FixedWallClock):
        return model.ms / 1000.0
    return model.ms[request_number % len(model.ms)] / 1000.0


def latency_frames(model: LatencyModel, request_number: int, fps: float) -> int:
    """Frames between submission and visibility; wall-clock models are rounded up at ``fps``."""
    if isinstance(model, FixedFrames):
        return model.frames
    return math.ceil(latency_seconds(model, request_number) * fps - 1e-9)


# -- detectors ---------------------------------------------------------------

class Detector:
    """Base detector. Subclasses implement :meth:`infer`."""

    def preprocess_image(self, img: Frame) -> Frame:
        return img

    def infer(self, img: Frame) -> DetectionSet:
        raise NotImplementedError

    def __call__(self, img: Frame) -> DetectionSet:
        return self.infer(self.preprocess_image(img))


class FileOracle(Detector):
    """Replays boxes from a detections table, filtered by score."""

    def __init__(self, detections: Mapping[int, DetectionSet], score_threshold: float = 0.0):
        self.detections = dict(detections)
        self.score_threshold = score_threshold

    @classmethod
    def from_file(cls, path: str | Path, score_threshold: float = 0.0) -> "FileOracle":
        from .motfile import read_det

        try:
            return cls(read_det(path), score_threshold)
        except ParseError as exc:
            raise ConfigError(f"bad detections file: {exc}") from None

    def infer(self, img: Frame) -> DetectionSet:
        ds = self.detections.get(img.index)
        if ds is None:
            return DetectionSet(img.index)
        return DetectionSet(img.index, tuple(d for d in ds if d.score >= self.score_threshold))


class ScriptedMock(Detector):
    """Returns pre-scripted boxes per frame index; unscripted frames get an empty set.

    JSON schedule format: ``{"frames": {"<index>": [[x, y, w, h, score, class_id], ...]}}``
    with ``score`` and ``class_id`` optional.
    """

    def __init__(self, schedule: Mapping[int, Sequence[Detection]]):
        self.schedule = {int(k): tuple(v) for k, v in schedule.items()}
        self.calls: list[int] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedMock":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read mock schedule {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"mock schedule {path}: line {exc.lineno}: {exc.msg}") from None
        try:
            frames = raw["frames"]
            schedule = {int(k): [Detection(*row) for row in rows] for k, rows in frames.items()}
        except (KeyError, TypeError, ValueError, MovexError) as exc:
            raise ConfigError(f"mock schedule {path}: {exc}") from None
        return cls(schedule)

    def infer(self, img: Frame) -> DetectionSet:
        self.calls.append(img.index)
        return DetectionSet(img.index, self.schedule.get(img.index, ()))


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class FileOracleSpec:
    path: str
    score_threshold: float = 0.0


@dataclass(frozen=True)
class ScriptedMockSpec:
    path: str


@dataclass(frozen=True)
class DetectorSpec:
    """What detector to run and how late its answers arrive.

    ``kind`` may also be a ready-made :class:`Detector` instance.
    """

    kind: FileOracleSpec | ScriptedMockSpec | Detector
    latency: LatencyModel = field(default_factory=lambda: FixedFrames(0))

    def build(self) -> Detector:
        if isinstance(self.kind, Detector):
            return self.kind
        if isinstance(self.kind, FileOracleSpec):
            return FileOracle.from_file(self.kind.path, self.kind.score_threshold)
        if isinstance(self.kind, ScriptedMockSpec):
            return ScriptedMock.from_file(self.kind.path)
        raise ConfigError(f"unknown detector kind {self.kind!r}")


# -- request / response ------------------------------------------------------

@dataclass(frozen=True)
class DetectorRequest:
    frame: Frame

    @property
    def frame_index(self) -> int:
        return self.frame.index


@dataclass(frozen=True)
class DetectorResponse:
    frame_index: int
    detections: DetectionSet
    latency: float  # seconds, detector side only

    def __post_init__(self) -> None:
        if self.detections.frame_index != self.frame_index:
            raise InvalidInputError(
                f"response tagged {self.frame_index} carries detections for {self.detections.frame_index}")


def detect(req: DetectorRequest, detector: Detector, latency: LatencyModel | None = None,
           request_number: int = 0, realtime: bool = False, sleep=time.sleep) -> DetectorResponse:
    """Serve one request. In real-time mode the wall-clock latency is slept out before returning."""
    t0 = time.perf_counter()
    ds = detector(req.frame)
    if ds.frame_index != req.frame_index:
        ds = ds.at(req.frame_index)
    if realtime and latency is not None:
        remaining = latency_seconds(latency, request_number) - (time.perf_counter() - t0)
        if remaining > 0:
            sleep(remaining)
    return DetectorResponse(req.frame_index, ds, time.perf_counter() - t0)


class DetectorFailure(MovexError):
    def __init__(self, frame_index: int, cause: BaseException):
        self.frame_index = frame_index
        self.cause = cause
        super().__init__(f"detector failed on frame {frame_index}: {cause}")


class DeterministicChannel:
    """Single-threaded channel: a response is visible ``L`` frames after its request."""

    def __init__(self, detector: Detector, latency: LatencyModel, fps: float = 30.0):
        self.detector = detector
        self.latency = latency
        self.fps = fps
        self.requests = 0
        self._pending: tuple[int, DetectorResponse | DetectorFailure] | None = None

    def submit(self, req: DetectorRequest, at_frame: int) -> None:
        if self._pending is not None:
            raise InvalidInputError("a detector request is already in flight")
        n = self.requests
        self.requests += 1
        try:
            resp: DetectorResponse | DetectorFailure = detect(req, self.detector)
        except Exception as exc:  # surfaced when the response would have arrived
            resp = DetectorFailure(req.frame_index, exc)
        self._pending = (at_frame + latency_frames(self.latency, n, self.fps), resp)

    def poll(self, frame: int) -> DetectorResponse | None:
        if self._pending is None or frame < self._pending[0]:
            return None
        return self._take()

    def wait(self) -> DetectorResponse:
        if self._pending is None:
            raise InvalidInputError("no detector request in flight")
        return self._take()

    def _take(self) -> DetectorResponse:
        _, resp = self._pending
        self._pending = None
        if isinstance(resp, DetectorFailure):
            raise resp
        return resp

    def close(self) -> None:
        pass


_STOP = object()


class ThreadedChannel:
    """Detector on its own worker thread, joined by single-slot request and response queues.

    Wall-clock latency models are polled without blocking. ``FixedFrames``
    responses are collected exactly at their due frame so the output matches
    :class:`DeterministicChannel`.
    """

    def __init__(self, detector: Detector, latency: LatencyModel, fps: float = 30.0):
        self.detector = detector
        self.latency = latency
        self.fps = fps
        self.requests = 0
        self._req: queue.Queue = queue.Queue(maxsize=1)
        self._resp: queue.Queue = queue.Queue(maxsize=1)
        self._due: int | None = None
        self._inflight = False
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._work, name="detector", daemon=True)
        self._thread.start()

    def _work(self) -> None:
        while True:
            item = self._req.get()
            if item is _STOP:
                return
            req, n = item
            try:
                out = detect(req, self.detector, self.latency, n, realtime=True, sleep=self._stop.wait)
            except Exception as exc:
                out = DetectorFailure(req.frame_index, exc)
            self._resp.put(out)

    def submit(self, req: DetectorRequest, at_frame: int) -> None:
        if self._inflight:
            raise InvalidInputError("a detector request is already in flight")
        n = self.requests
        self.requests += 1
        self._inflight = True
        if isinstance(self.latency, FixedFrames):
            self._due = at_frame + self.latency.frames
        self._req.put_nowait((req, n))

    def poll(self, frame: int) -> DetectorResponse | None:
        if not self._inflight:
            return None
        if self._due is not None:
            if frame < self._due:
                return None
            return self.wait()
        try:
            out = self._resp.get_nowait()
        except queue.Empty:
            return None
        return self._deliver(out)

    def wait(self) -> DetectorResponse:
        if not self._inflight:
            raise InvalidInputError("no detector request in flight")
        return self._deliver(self._resp.get())

    def _deliver(self, out) -> DetectorResponse:
        self._inflight = False
        self._due = None
        if isinstance(out, DetectorFailure):
            raise out
        return out

    def close(self) -> None:
        self._stop.set()
        self._req.put(_STOP)
        self._thread.join(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
