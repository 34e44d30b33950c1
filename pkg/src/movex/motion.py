"""Block-matching motion estimation over luma frames.

Vectors follow one convention throughout the package: a vector ``(dx, dy)``
attached to a block of the *current* frame says that the block's content sat
at ``(x - dx, y - dy)`` in the previous frame, i.e. content moved by
``(dx, dy)`` from ``prev`` to ``cur``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError
from .frames import Frame


class MotionVector(NamedTuple):
    dx: int
    dy: int


class SearchMethod(str, enum.Enum):
    FULL = "full"
    THREE_STEP = "threestep"


@dataclass(frozen=True)
class MotionEstimatorParams:
    block_size: int = 16
    search_range: int = 16
    method: SearchMethod = SearchMethod.FULL
    # Subtracted from the MAD of the (0, 0) candidate before comparison.
    zero_bias: float = 0.0

    def __post_init__(self) -> None:
        if self.block_size < 4:
            raise InvalidInputError(f"block_size must be >= 4, got {self.block_size}")
        if self.search_range < 1:
            raise InvalidInputError(f"search_range must be >= 1, got {self.search_range}")
        if self.zero_bias < 0:
            raise InvalidInputError(f"zero_bias must be non-negative, got {self.zero_bias}")
        object.__setattr__(self, "method", SearchMethod(self.method))


@dataclass(eq=False)
class MotionVectorField:
    """Per-block displacements from frame ``src_index`` to ``src_index + 1``.

    ``vectors`` has shape (grid_h, grid_w, 2) with ``[..., 0] = dx`` and
    ``[..., 1] = dy``.
    """

    src_index: int
    frame_w: int
    frame_h: int
    block_size: int
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.src_index < 0:
            raise InvalidInputError(f"src_index must be non-negative, got {self.src_index}")
        if self.frame_w < 1 or self.frame_h < 1 or self.block_size < 1:
            raise InvalidInputError("frame dimensions and block_size must be positive")
        vec = np.asarray(self.vectors)
        expected = (self.grid_h, self.grid_w, 2)
        if vec.shape != expected:
            raise InvalidInputError(f"vectors shape {vec.shape} does not match grid {expected}")
        if vec.size and not np.issubdtype(vec.dtype, np.integer):
            raise InvalidInputError(f"vectors must be integers, got {vec.dtype}")
        self.vectors = vec.astype(np.int32, copy=False)

    @property
    def dst_index(self) -> int:
        return self.src_index + 1

    @property
    def grid_w(self) -> int:
        return -(-self.frame_w // self.block_size)

    @property
    def grid_h(self) -> int:
        return -(-self.frame_h // self.block_size)

    def vector_at(self, bx: int, by: int) -> MotionVector:
        dx, dy = self.vectors[by, bx]
        return MotionVector(int(dx), int(dy))

    def iter_vectors(self):
        """Row-major iteration over the grid."""
        for dx, dy in self.vectors.reshape(-1, 2):
            yield MotionVector(int(dx), int(dy))

    @classmethod
    def uniform(cls, src_index: int, frame_w: int, frame_h: int, block_size: int,
                dx: int, dy: int) -> "MotionVectorField":
        gw = -(-frame_w // block_size)
        gh = -(-frame_h // block_size)
        vec = np.empty((gh, gw, 2), dtype=np.int32)
        vec[..., 0] = dx
        vec[..., 1] = dy
        return cls(src_index, frame_w, frame_h, block_size, vec)

    @classmethod
    def zeros(cls, src_index: int, frame_w: int, frame_h: int, block_size: int) -> "MotionVectorField":
        return cls.uniform(src_index, frame_w, frame_h, block_size, 0, 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MotionVectorField):
            return NotImplemented
        return (
            self.src_index == other.src_index
            and self.frame_w == other.frame_w
            and self.frame_h == other.frame_h
            and self.block_size == other.block_size
            and np.array_equal(self.vectors, other.vectors)
        )

    def __repr__(self) -> str:
        return (f"MotionVectorField(src={self.src_index}, {self.frame_w}x{self.frame_h}, "
                f"block={self.block_size}, grid={self.grid_w}x{self.grid_h})")


def candidate_order(search_range: int) -> list[tuple[int, int]]:
    """All displacements in the window, sorted by the tie-break preference."""
    r = search_range
    cands = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    cands.sort(key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]))
    return cands


def _check_pair(prev: Frame, cur: Frame) -> None:
    if prev.luma.shape != cur.luma.shape:
        raise InvalidInputError(
            f"frame size mismatch: {prev.width}x{prev.height} vs {cur.width}x{cur.height}")
    if cur.index != prev.index + 1:
        raise InvalidInputError(
            f"frames must be consecutive, got indices {prev.index} and {cur.index}")


def _block_extents(length: int, bs: int) -> tuple[np.ndarray, np.ndarray]:
    starts = np.arange(0, length, bs)
    ends = np.minimum(starts + bs, length)
    return starts, ends


def _full_search(prev: np.ndarray, cur: np.ndarray, params: MotionEstimatorParams) -> np.ndarray:
    h, w = cur.shape
    bs = params.block_size
    gh, gw = -(-h // bs), -(-w // bs)
    x0, x1 = _block_extents(w, bs)
    y0, y1 = _block_extents(h, bs)
    npix = np.outer(y1 - y0, x1 - x0).astype(np.float64)

    prev16 = prev.astype(np.int16)
    cur16 = cur.astype(np.int16)
    diff = np.zeros((h, w), dtype=np.int16)

    best = np.full((gh, gw), np.inf)
    out = np.zeros((gh, gw, 2), dtype=np.int32)
    for dx, dy in candidate_order(params.search_range):
        # Blocks whose source patch lies entirely inside prev.
        vx = (x0 - dx >= 0) & (x1 - dx <= w)
        vy = (y0 - dy >= 0) & (y1 - dy <= h)
        if not vx.any() or not vy.any():
            continue
        valid = np.outer(vy, vx)
        ys, ye = max(0, dy), h + min(0, dy)
        xs, xe = max(0, dx), w + min(0, dx)
        diff.fill(0)
        np.abs(cur16[ys:ye, xs:xe] - prev16[ys - dy:ye - dy, xs - dx:xe - dx],
               out=diff[ys:ye, xs:xe])
        sad = np.add.reduceat(np.add.reduceat(diff, x0, axis=1, dtype=np.int32), y0, axis=0)
        mad = sad / npix
        if dx == 0 and dy == 0 and params.zero_bias:
            mad = mad - params.zero_bias
        better = valid & (mad < best)
        best[better] = mad[better]
        out[better] = (dx, dy)
    return out


def _block_mad(prev: np.ndarray, cur_block: np.ndarray, sy: int, sx: int) -> float:
    bh, bw = cur_block.shape
    patch = prev[sy:sy + bh, sx:sx + bw]
    return float(np.abs(cur_block - patch).sum()) / (bh * bw)


def _three_step(prev: np.ndarray, cur: np.ndarray, params: MotionEstimatorParams) -> np.ndarray:
    h, w = cur.shape
    bs, r = params.block_size, params.search_range
    x0, x1 = _block_extents(w, bs)
    y0, y1 = _block_extents(h, bs)
    prev16 = prev.astype(np.int16)
    cur16 = cur.astype(np.int16)
    out = np.zeros((len(y0), len(x0), 2), dtype=np.int32)

    def key(v):
        return (abs(v[0]) + abs(v[1]), v[1], v[0])

    for by in range(len(y0)):
        for bx in range(len(x0)):
            bx0, bx1, by0, by1 = int(x0[bx]), int(x1[bx]), int(y0[by]), int(y1[by])
            block = cur16[by0:by1, bx0:bx1]
            cache: dict[tuple[int, int], float] = {}

            def cost(v):
                if v not in cache:
                    dx, dy = v
                    if (abs(dx) > r or abs(dy) > r or bx0 - dx < 0 or bx1 - dx > w
                            or by0 - dy < 0 or by1 - dy > h):
                        cache[v] = math.inf
                    else:
                        c = _block_mad(prev16, block, by0 - dy, bx0 - dx)
                        if v == (0, 0):
                            c -= params.zero_bias
                        cache[v] = c
                return cache[v]

            center = (0, 0)
            step = -(-r // 2)
            while step >= 1:
                pts = [(center[0] + sx, center[1] + sy)
                       for sy in (-step, 0, step) for sx in (-step, 0, step)]
                center = min(pts, key=lambda v: (cost(v), key(v)))
                step //= 2
            out[by, bx] = center
    return out


def estimate_motion(prev: Frame, cur: Frame,
                    params: MotionEstimatorParams | None = None) -> MotionVectorField:
    """Estimate one vector per block of ``cur`` by MAD block matching against ``prev``.

    Candidates whose source patch would leave ``prev`` are skipped; edge blocks
    smaller than ``block_size`` are matched over their in-frame pixels only.
    Ties on MAD go to the smaller ``|dx| + |dy|``, then smaller ``dy``, then
    smaller ``dx``.
    """
    params = params or MotionEstimatorParams()
    _check_pair(prev, cur)
    if params.method is SearchMethod.FULL:
        vec = _full_search(prev.luma, cur.luma, params)
    else:
        vec = _three_step(prev.luma, cur.luma, params)
    return MotionVectorField(prev.index, cur.width, cur.height, params.block_size, vec)


def estimate_sequence(frames, params: MotionEstimatorParams | None = None) -> list[MotionVectorField]:
    frames = list(frames)
    return [estimate_motion(a, b, params) for a, b in zip(frames, frames[1:])]
