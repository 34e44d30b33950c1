"""MOT Challenge text formats: det.txt (detections) and gt.txt (ground truth).

Frames are 1-based in files and 0-based everywhere else.
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import IO, Iterable, Mapping

from .errors import InvalidInputError, MovexError, ParseError
from .evaluation import GroundTruth, GTBox
from .propagation import Detection, DetectionSet


def _lines(source) -> tuple[list[str], str | None]:
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        try:
            return path.read_text().splitlines(), str(path)
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc.strerror}", source=str(path)) from None
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines(), getattr(source, "name", None)


def _split(line: str, lineno: int, min_cols: int, source: str | None) -> list[float]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < min_cols:
        raise ParseError(f"expected at least {min_cols} comma-separated columns, got {len(parts)}",
                         lineno, source)
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"non-numeric column in {line!r}", lineno, source) from None


def _frame(value: float, lineno: int, source: str | None) -> int:
    if value != int(value) or value < 1:
        raise ParseError(f"frame number must be a positive integer, got {value}", lineno, source)
    return int(value) - 1


def read_det(source: str | os.PathLike | IO) -> dict[int, DetectionSet]:
    """Parse a det.txt file into per-frame detection sets (0-based frame keys).

    Columns: frame,id,bb_left,bb_top,bb_width,bb_height,conf[,x,y,z]. The id
    and world-coordinate columns are ignored.
    """
    lines, name = _lines(source)
    frames: dict[int, list[Detection]] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        cols = _split(line, lineno, 7, name)
        fi = _frame(cols[0], lineno, name)
        try:
            det = Detection(cols[2], cols[3], cols[4], cols[5], score=cols[6])
        except MovexError as exc:
            raise ParseError(str(exc), lineno, name) from None
        frames.setdefault(fi, []).append(det)
    return {fi: DetectionSet(fi, tuple(ds)) for fi, ds in sorted(frames.items())}


def format_det(sets: Iterable[DetectionSet]) -> str:
    buf = io.StringIO()
    for ds in sets:
        for d in ds.detections:
            buf.write(f"{ds.frame_index + 1},-1,{d.x!r},{d.y!r},{d.w!r},{d.h!r},{d.score!r},-1,-1,-1\n")
    return buf.getvalue()


def write_det(sets: Iterable[DetectionSet] | Mapping[int, DetectionSet],
              sink: str | os.PathLike | IO[str]) -> None:
    if isinstance(sets, Mapping):
        sets = [sets[k] for k in sorted(sets)]
    text = format_det(sets)
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_text(text)
    else:
        sink.write(text)


def read_gt(source: str | os.PathLike | IO, num_frames: int | None = None) -> GroundTruth:
    """Parse a gt.txt file. Rows with flag 0 become ignore regions.

    Columns: frame,id,bb_left,bb_top,bb_width,bb_height,flag,class,visibility.
    """
    lines, name = _lines(source)
    boxes: dict[int, list[GTBox]] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        cols = _split(line, lineno, 7, name)
        fi = _frame(cols[0], lineno, name)
        if not (cols[4] > 0 and cols[5] > 0):
            raise ParseError("box width and height must be positive", lineno, name)
        boxes.setdefault(fi, []).append(
            GTBox(cols[2], cols[3], cols[4], cols[5], ignore=cols[6] == 0, track_id=int(cols[1])))
    if num_frames is None:
        num_frames = max(boxes) + 1 if boxes else 0
    elif boxes and max(boxes) >= num_frames:
        raise InvalidInputError(f"ground truth has frame {max(boxes)} beyond range {num_frames}")
    return GroundTruth(num_frames, {k: tuple(v) for k, v in sorted(boxes.items())})


def format_gt(gt: GroundTruth) -> str:
    buf = io.StringIO()
    for fi in sorted(gt.boxes):
        for b in gt.boxes[fi]:
            flag = 0 if b.ignore else 1
            buf.write(f"{fi + 1},{b.track_id},{b.x!r},{b.y!r},{b.w!r},{b.h!r},{flag},1,1.0\n")
    return buf.getvalue()


def write_gt(gt: GroundTruth, sink: str | os.PathLike | IO[str]) -> None:
    text = format_gt(gt)
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_text(text)
    else:
        sink.write(text)
