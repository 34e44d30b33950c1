"""MVF sidecar files: pre-computed motion-vector fields in a line-oriented text format.

    MVF 1 <frame_w> <frame_h> <block_size> <num_fields>
    FIELD <src_index>
    <dx> <dy>        # grid_w * grid_h lines, row-major
    ...
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError
from .motion import MotionVectorField

MAGIC = "MVF"
VERSION = 1


def _ints(parts: list[str], lineno: int) -> list[int]:
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(parts)!r}", lineno) from None


def read_mvf(stream: IO[bytes] | IO[str] | bytes | str | os.PathLike) -> list[MotionVectorField]:
    """Parse an MVF stream (binary or text file object, raw bytes, or a path)."""
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, "rb") as fh:
            return read_mvf(fh)
    if isinstance(stream, bytes):
        data = stream
    else:
        data = stream.read()
    text = data.decode("ascii") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty stream, missing MVF header", 1)

    head = lines[0].split()
    if len(head) != 6 or head[0] != MAGIC:
        raise ParseError(f"malformed header {lines[0]!r}", 1)
    version, frame_w, frame_h, block_size, num_fields = _ints(head[1:], 1)
    if version != VERSION:
        raise ParseError(f"unsupported MVF version {version}", 1)
    if frame_w < 1 or frame_h < 1 or block_size < 1 or num_fields < 0:
        raise ParseError("header values out of range", 1)
    gw = -(-frame_w // block_size)
    gh = -(-frame_h // block_size)
    n = gw * gh

    fields: list[MotionVectorField] = []
    pos = 1
    while pos < len(lines):
        lineno = pos + 1
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != "FIELD":
            raise ParseError(f"expected 'FIELD <src_index>', got {lines[pos]!r}", lineno)
        (src,) = _ints(parts[1:], lineno)
        if src < 0:
            raise ParseError(f"negative src_index {src}", lineno)
        if len(fields) == num_fields:
            raise ParseError(f"more than {num_fields} fields declared in header", lineno)
        vec = np.empty((n, 2), dtype=np.int32)
        for k in range(n):
            row = pos + 1 + k
            if row >= len(lines) or lines[row].startswith("FIELD"):
                raise ParseError(f"field {src} has {k} vectors, expected {n}", row + 1)
            vals = lines[row].split()
            if len(vals) != 2:
                raise ParseError(f"expected '<dx> <dy>', got {lines[row]!r}", row + 1)
            vec[k] = _ints(vals, row + 1)
        pos += 1 + n
        fields.append(MotionVectorField(src, frame_w, frame_h, block_size, vec.reshape(gh, gw, 2)))

    if len(fields) != num_fields:
        raise ParseError(f"header declares {num_fields} fields, found {len(fields)}", len(lines))
    fields.sort(key=lambda f: f.src_index)
    for a, b in zip(fields, fields[1:]):
        if a.src_index == b.src_index:
            raise ParseError(f"duplicate field for src_index {a.src_index}")
    return fields


def _check_consistent(fields: Sequence[MotionVectorField]) -> tuple[int, int, int]:
    if not fields:
        raise InvalidInputError("cannot write an empty MVF sequence")
    dims = (fields[0].frame_w, fields[0].frame_h, fields[0].block_size)
    for f in fields[1:]:
        if (f.frame_w, f.frame_h, f.block_size) != dims:
            raise InvalidInputError(
                f"field {f.src_index} has dims {(f.frame_w, f.frame_h, f.block_size)}, expected {dims}")
    return dims


def dumps_mvf(fields: Iterable[MotionVectorField]) -> bytes:
    fields = list(fields)
    w, h, bs = _check_consistent(fields)
    buf = io.StringIO()
    buf.write(f"{MAGIC} {VERSION} {w} {h} {bs} {len(fields)}\n")
    for f in fields:
        buf.write(f"FIELD {f.src_index}\n")
        for dx, dy in f.vectors.reshape(-1, 2).tolist():
            buf.write(f"{dx} {dy}\n")
    return buf.getvalue().encode("ascii")


def write_mvf(fields: Iterable[MotionVectorField], sink: IO[bytes] | str | os.PathLike) -> None:
    payload = dumps_mvf(fields)
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_bytes(payload)
    else:
        sink.write(payload)
