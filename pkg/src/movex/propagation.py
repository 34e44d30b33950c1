"""Translation-only propagation of detection boxes through motion-vector fields."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BufferOverflowError, InvalidInputError
from .motion import MotionVectorField

DEFAULT_BUFFER_CAPACITY = 1024


@dataclass(frozen=True)
class Detection:
    """Axis-aligned box with top-left corner (x, y)."""

    x: float
    y: float
    w: float
    h: float
    score: float = 1.0
    class_id: int = 0

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise InvalidInputError(f"box size must be positive, got w={self.w} h={self.h}")
        if not 0.0 <= self.score <= 1.0:
            raise InvalidInputError(f"score must be in [0, 1], got {self.score}")

    @property
    def box(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def translated(self, dx: float, dy: float) -> "Detection":
        return replace(self, x=self.x + dx, y=self.y + dy)


@dataclass(frozen=True)
class DetectionSet:
    frame_index: int
    detections: tuple[Detection, ...] = ()

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise InvalidInputError(f"frame_index must be non-negative, got {self.frame_index}")
        object.__setattr__(self, "detections", tuple(self.detections))

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self) -> Iterator[Detection]:
        return iter(self.detections)

    def at(self, frame_index: int) -> "DetectionSet":
        return DetectionSet(frame_index, self.detections)


class AggregationKind(str, enum.Enum):
    MEDIAN = "median"
    MEAN = "mean"


def _block_geometry(f: MotionVectorField):
    bs = f.block_size
    x0 = np.arange(0, f.frame_w, bs, dtype=np.float64)
    y0 = np.arange(0, f.frame_h, bs, dtype=np.float64)
    x1 = np.minimum(x0 + bs, f.frame_w)
    y1 = np.minimum(y0 + bs, f.frame_h)
    return x0, x1, y0, y1


def enclosed_vectors(d: Detection, f: MotionVectorField) -> np.ndarray:
    """Vectors of the blocks that fall in the box, as an (n, 2) int array.

    A block is enclosed when the centre of its in-frame extent lies inside
    ``[x, x+w) x [y, y+h)``. Boxes too small to contain any centre fall back
    to every block they overlap.
    """
    x0, x1, y0, y1 = _block_geometry(f)
    cx = (x0 + x1) / 2
    cy = (y0 + y1) / 2
    in_x = (cx >= d.x) & (cx < d.x + d.w)
    in_y = (cy >= d.y) & (cy < d.y + d.h)
    if not (in_x.any() and in_y.any()):
        in_x = (x0 < d.x + d.w) & (x1 > d.x)
        in_y = (y0 < d.y + d.h) & (y1 > d.y)
    return f.vectors[np.ix_(in_y, in_x)].reshape(-1, 2)


def aggregate_vectors(vectors: np.ndarray | Sequence[Sequence[float]],
                      kind: AggregationKind = AggregationKind.MEDIAN) -> tuple[float, float]:
    """Reduce a set of vectors to one displacement, component-wise. Empty sets give (0, 0)."""
    vec = np.asarray(vectors, dtype=np.float64).reshape(-1, 2)
    if len(vec) == 0:
        return (0.0, 0.0)
    kind = AggregationKind(kind)
    if kind is AggregationKind.MEDIAN:
        dx, dy = np.median(vec, axis=0)
    else:
        dx, dy = vec.mean(axis=0)
    return (float(dx), float(dy))


def aggregate(d: Detection, f: MotionVectorField,
              kind: AggregationKind = AggregationKind.MEDIAN) -> tuple[float, float]:
    return aggregate_vectors(enclosed_vectors(d, f), kind)


def _overlaps_frame(d: Detection, frame_w: int, frame_h: int) -> bool:
    return d.x < frame_w and d.x + d.w > 0 and d.y < frame_h and d.y + d.h > 0


def propagate(ds: DetectionSet, f: MotionVectorField,
              kind: AggregationKind = AggregationKind.MEDIAN) -> DetectionSet:
    """Move every box of ``ds`` by its aggregated displacement into frame ``f.dst_index``.

    Sizes, scores, classes and order are kept. Boxes that end up with no
    overlap with the frame are dropped; partially visible boxes are kept whole.
    """
    if ds.frame_index != f.src_index:
        raise InvalidInputError(
            f"detections are for frame {ds.frame_index}, field starts at {f.src_index}")
    out = []
    for d in ds.detections:
        moved = d.translated(*aggregate(d, f, kind))
        if _overlaps_frame(moved, f.frame_w, f.frame_h):
            out.append(moved)
    return DetectionSet(f.dst_index, tuple(out))


@dataclass
class FlowBuffer:
    """FIFO of consecutive motion fields kept between detector results."""

    capacity: int | None = DEFAULT_BUFFER_CAPACITY
    entries: deque = field(default_factory=deque, repr=False)

    def __post_init__(self) -> None:
        if self.capacity is not None and self.capacity < 1:
            raise InvalidInputError(f"capacity must be positive, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[MotionVectorField]:
        return iter(self.entries)

    @property
    def first_src(self) -> int | None:
        return self.entries[0].src_index if self.entries else None

    @property
    def last_src(self) -> int | None:
        return self.entries[-1].src_index if self.entries else None

    def push(self, f: MotionVectorField) -> None:
        if self.entries and f.src_index != self.entries[-1].src_index + 1:
            raise InvalidInputError(
                f"field src {f.src_index} does not follow buffer tail {self.entries[-1].src_index}")
        if self.capacity is not None and len(self.entries) >= self.capacity:
            raise BufferOverflowError(
                f"flow buffer full ({self.capacity} fields); detector results are not arriving")
        self.entries.append(f)

    def clear(self) -> None:
        self.entries.clear()


def replay(prior: DetectionSet, buf: Iterable[MotionVectorField], from_index: int,
           kind: AggregationKind = AggregationKind.MEDIAN) -> DetectionSet:
    """Fold ``propagate`` over the buffered fields starting at ``from_index``.

    Fields older than ``from_index`` are skipped.
    """
    if prior.frame_index != from_index:
        raise InvalidInputError(
            f"prior is for frame {prior.frame_index}, replay starts at {from_index}")
    cur = prior
    for f in buf:
        if f.src_index < from_index:
            continue
        if f.src_index != cur.frame_index:
            raise InvalidInputError(
                f"buffer is missing the field for frame {cur.frame_index} (next is {f.src_index})")
        cur = propagate(cur, f, kind)
    return cur
