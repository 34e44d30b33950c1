"""Grayscale frames and PGM/PPM sequence I/O."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .errors import InvalidInputError, ParseError

_FRAME_SUFFIXES = (".pgm", ".ppm")


@dataclass(eq=False)
class Frame:
    """One luma image of a sequence. ``luma`` is a (height, width) uint8 array."""

    index: int
    luma: np.ndarray

    def __post_init__(self) -> None:
        if self.index < 0:
            raise InvalidInputError(f"frame index must be non-negative, got {self.index}")
        luma = np.asarray(self.luma)
        if luma.ndim != 2 or luma.shape[0] < 1 or luma.shape[1] < 1:
            raise InvalidInputError(f"luma must be a non-empty 2D array, got shape {luma.shape}")
        if luma.dtype != np.uint8:
            raise InvalidInputError(f"luma must be uint8, got {luma.dtype}")
        self.luma = luma

    @property
    def width(self) -> int:
        return int(self.luma.shape[1])

    @property
    def height(self) -> int:
        return int(self.luma.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.luma, other.luma)

    def __repr__(self) -> str:
        return f"Frame(index={self.index}, {self.width}x{self.height})"


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma with integer weights, rounding half up."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidInputError(f"expected (h, w, 3) array, got shape {rgb.shape}")
    r, g, b = (rgb[..., c].astype(np.int32) for c in range(3))
    return ((299 * r + 587 * g + 114 * b + 500) // 1000).astype(np.uint8)


# Header tokens may be separated by arbitrary whitespace and interleaved with comments.
_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_netpbm(data: bytes, source: str) -> np.ndarray:
    tokens = []
    pos = 0
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ParseError("truncated header", source=source)
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}, expected P5 or P6", lineno=1, source=source)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError(f"bad header field: {exc}", source=source) from None
    if maxval != 255:
        raise ParseError(f"only maxval 255 is supported, got {maxval}", source=source)
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = data[pos:pos + need]
    if len(payload) != need:
        raise ParseError(f"expected {need} pixel bytes, found {len(payload)}", source=source)
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return rgb_to_luma(arr.reshape(height, width, 3))


def read_pgm(path: str | os.PathLike, index: int = 0) -> Frame:
    """Read a binary P5 (or P6, converted to luma) file."""
    path = Path(path)
    return Frame(index, _read_netpbm(path.read_bytes(), str(path)))


def write_pgm(frame: Frame | np.ndarray, dest: str | os.PathLike | BinaryIO) -> None:
    luma = frame.luma if isinstance(frame, Frame) else np.asarray(frame, dtype=np.uint8)
    h, w = luma.shape
    payload = f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(luma).tobytes()
    if hasattr(dest, "write"):
        dest.write(payload)
    else:
        Path(dest).write_bytes(payload)


def list_frame_files(directory: str | os.PathLike) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"frame directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in _FRAME_SUFFIXES)


def iter_frames(directory: str | os.PathLike) -> Iterator[Frame]:
    """Yield frames in lexicographic filename order, indexed from 0."""
    for i, path in enumerate(list_frame_files(directory)):
        yield read_pgm(path, index=i)


def load_frames(directory: str | os.PathLike) -> list[Frame]:
    return list(iter_frames(directory))


def write_frames(frames: list[Frame], directory: str | os.PathLike, width: int = 6) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in frames:
        p = directory / f"{f.index + 1:0{width}d}.pgm"
        write_pgm(f, p)
        paths.append(p)
    return paths
