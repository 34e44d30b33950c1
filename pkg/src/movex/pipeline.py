"""Optimistic sparse detection propagation: the frame loop around an asynchronous detector.

Every frame is answered immediately by propagating the previous answer one
field forward. Fields are also kept in a buffer; when the detector returns
boxes for an older frame, they are replayed through the buffer up to the
current frame and replace the running answer.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .detectors import (DeterministicChannel, DetectorFailure, DetectorRequest, DetectorSpec,
                        ThreadedChannel)
from .errors import InvalidInputError, MovexError, PipelineError
from .frames import Frame
from .motion import MotionEstimatorParams, MotionVectorField, estimate_motion
from .mvf import read_mvf
from .propagation import (DEFAULT_BUFFER_CAPACITY, AggregationKind, DetectionSet, FlowBuffer,
                          propagate, replay)

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    REALTIME = "realtime"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class EstimatorFlow:
    params: MotionEstimatorParams = field(default_factory=MotionEstimatorParams)


@dataclass(frozen=True)
class SidecarFlow:
    """Pre-computed fields, from an MVF file path or already in memory."""

    source: Union[str, Path, tuple[MotionVectorField, ...]]


FlowSourceSpec = Union[EstimatorFlow, SidecarFlow]


@dataclass(frozen=True)
class PipelineConfig:
    detector: DetectorSpec
    flow: FlowSourceSpec = field(default_factory=EstimatorFlow)
    aggregation: AggregationKind = AggregationKind.MEDIAN
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY
    mode: Mode = Mode.DETERMINISTIC
    fps: float = 30.0  # converts wall-clock latencies to frames in deterministic mode

    def __post_init__(self) -> None:
        if self.buffer_capacity < 1:
            raise InvalidInputError(f"buffer_capacity must be >= 1, got {self.buffer_capacity}")
        if self.fps <= 0:
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "aggregation", AggregationKind(self.aggregation))
        object.__setattr__(self, "mode", Mode(self.mode))


class FlowProvider:
    """Hands out the field prev -> cur, either estimated on the fly or looked up."""

    def __init__(self, spec: FlowSourceSpec):
        self.params: MotionEstimatorParams | None = None
        self.fields: dict[int, MotionVectorField] | None = None
        if isinstance(spec, EstimatorFlow):
            self.params = spec.params
        elif isinstance(spec, SidecarFlow):
            src = spec.source
            fields = read_mvf(src) if isinstance(src, (str, Path)) else list(src)
            self.fields = {f.src_index: f for f in fields}
        else:
            raise InvalidInputError(f"unknown flow source {spec!r}")

    def __call__(self, prev: Frame, cur: Frame) -> MotionVectorField:
        if self.fields is None:
            return estimate_motion(prev, cur, self.params)
        f = self.fields.get(prev.index)
        if f is None:
            raise InvalidInputError(f"sidecar has no field for frame {prev.index}")
        if (f.frame_w, f.frame_h) != (cur.width, cur.height):
            raise InvalidInputError(
                f"sidecar field is {f.frame_w}x{f.frame_h}, frames are {cur.width}x{cur.height}")
        return f


@dataclass(frozen=True)
class PipelineState:
    m: int  # frame the buffer starts at (last prior update)
    i: int  # current frame
    prior: DetectionSet  # detector answer replayed to frame m
    current: DetectionSet  # answer emitted at frame i
    buffer: FlowBuffer
    inflight: int | None = None  # frame index of the pending detector request

    def __post_init__(self) -> None:
        if self.m > self.i:
            raise InvalidInputError(f"prior frame {self.m} is ahead of current frame {self.i}")

    @property
    def prior_age(self) -> int:
        return self.i - self.m

    @classmethod
    def initial(cls, first: DetectionSet, capacity: int = DEFAULT_BUFFER_CAPACITY) -> "PipelineState":
        return cls(first.frame_index, first.frame_index, first, first, FlowBuffer(capacity))


def step(state: PipelineState, new_field: MotionVectorField, maybe_result: DetectionSet | None,
         kind: AggregationKind = AggregationKind.MEDIAN) -> tuple[PipelineState, DetectionSet]:
    """Advance one frame. The input state is left untouched.

    Without a result, the emitted set is the previous emission moved by
    ``new_field``. With a result (tagged by its request frame), the result is
    replayed through the buffer to the new frame, the buffer is emptied, and
    the state is marked idle so the caller sends a fresh request.
    """
    if new_field.src_index != state.i:
        raise InvalidInputError(f"field starts at frame {new_field.src_index}, state is at {state.i}")
    buf = FlowBuffer(state.buffer.capacity)
    buf.entries.extend(state.buffer.entries)
    buf.push(new_field)
    i = new_field.dst_index

    if maybe_result is None:
        emitted = propagate(state.current, new_field, kind)
        return replace(state, i=i, current=emitted, buffer=buf), emitted

    tag = maybe_result.frame_index
    if state.inflight is None or tag != state.inflight:
        raise InvalidInputError(f"result for frame {tag} does not match in-flight request {state.inflight}")
    if not state.m <= tag <= i:
        raise InvalidInputError(f"result frame {tag} outside buffered range [{state.m}, {i}]")
    emitted = replay(maybe_result, buf, tag, kind)
    buf.clear()
    return PipelineState(m=i, i=i, prior=emitted, current=emitted, buffer=buf, inflight=None), emitted


@dataclass(frozen=True)
class FrameResult:
    frame_index: int
    detections: DetectionSet
    step_latency: float  # seconds of propagation-worker work, detector time excluded
    prior_age: int
    updated: bool = False  # a detector result was folded in at this frame


@dataclass(frozen=True)
class LatencySummary:
    count: int
    mean: float
    median: float
    p95: float
    max: float
    prior_age_mean: float
    prior_age_max: int
    updates: int

    def to_dict(self, unit: str = "ms") -> dict:
        scale = 1000.0 if unit == "ms" else 1.0
        return {
            "frames": self.count,
            f"step_latency_{unit}": {
                "mean": self.mean * scale,
                "median": self.median * scale,
                "p95": self.p95 * scale,
                "max": self.max * scale,
            },
            "prior_age": {"mean": self.prior_age_mean, "max": self.prior_age_max},
            "detector_updates": self.updates,
        }


def measure_latency(results: Sequence[FrameResult]) -> LatencySummary:
    """Summary of step latencies (seconds) and prior ages. p95 is the nearest-rank percentile."""
    if not results:
        raise InvalidInputError("no frame results to summarise")
    lat = np.sort(np.array([r.step_latency for r in results], dtype=np.float64))
    ages = np.array([r.prior_age for r in results])
    rank = max(1, math.ceil(0.95 * len(lat)))
    return LatencySummary(
        count=len(results),
        mean=float(lat.mean()),
        median=float(np.median(lat)),
        p95=float(lat[rank - 1]),
        max=float(lat[-1]),
        prior_age_mean=float(ages.mean()),
        prior_age_max=int(ages.max()),
        updates=sum(r.updated for r in results),
    )


def _channel(cfg: PipelineConfig, detector):
    cls = ThreadedChannel if cfg.mode is Mode.REALTIME else DeterministicChannel
    return cls(detector, cfg.detector.latency, cfg.fps)


def iter_pipeline(frames: Iterable[Frame], cfg: PipelineConfig):
    """Yield one :class:`FrameResult` per input frame, in order."""
    it = iter(frames)
    try:
        first = next(it)
    except StopIteration:
        raise InvalidInputError("run_pipeline needs at least one frame") from None

    try:
        flow = FlowProvider(cfg.flow)
    except MovexError as exc:
        raise PipelineError(first.index, "motion", exc) from exc
    detector = cfg.detector.build()
    channel = _channel(cfg, detector)
    try:
        try:
            channel.submit(DetectorRequest(first), first.index)
            resp = channel.wait()
        except DetectorFailure as exc:
            raise PipelineError(exc.frame_index, "detectors", exc.cause) from exc
        t0 = time.perf_counter()
        state = PipelineState.initial(resp.detections, cfg.buffer_capacity)
        yield FrameResult(first.index, state.current, time.perf_counter() - t0, 0, True)

        prev = first
        for cur in it:
            t0 = time.perf_counter()
            try:
                f = flow(prev, cur)
            except MovexError as exc:
                raise PipelineError(cur.index, "motion", exc) from exc
            spent = time.perf_counter() - t0

            try:
                if state.inflight is None:
                    channel.submit(DetectorRequest(cur), cur.index)
                    state = replace(state, inflight=cur.index)
                resp = channel.poll(cur.index)
            except DetectorFailure as exc:
                raise PipelineError(cur.index, "detectors", exc) from exc
            result = None
            if resp is not None:
                if resp.frame_index == state.inflight:
                    result = resp.detections
                else:
                    log.warning("dropping response for frame %d, expected %s",
                                resp.frame_index, state.inflight)
                    state = replace(state, inflight=None)

            t1 = time.perf_counter()
            try:
                state, emitted = step(state, f, result, cfg.aggregation)
            except MovexError as exc:
                raise PipelineError(cur.index, "propagation", exc) from exc
            spent += time.perf_counter() - t1
            yield FrameResult(cur.index, emitted, spent, state.prior_age, result is not None)
            prev = cur
    finally:
        channel.close()


def run_pipeline(frames: Iterable[Frame], cfg: PipelineConfig) -> list[FrameResult]:
    return list(iter_pipeline(frames, cfg))
