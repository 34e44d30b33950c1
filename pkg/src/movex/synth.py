"""Seeded synthetic sequences: textured rectangles translating over a textured background."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .evaluation import GroundTruth, GTBox
from .frames import Frame, write_frames
from .motfile import write_det, write_gt
from .propagation import Detection, DetectionSet


@dataclass(frozen=True)
class SynthObject:
    x: int
    y: int
    w: int
    h: int
    velocity: tuple[int, int] = (0, 0)
    # Explicit per-step velocities (num_frames - 1 entries); overrides velocity and bouncing.
    velocities: tuple[tuple[int, int], ...] | None = None
    # Region (x0, y0, x1, y1) the box bounces inside; defaults to the frame minus margin.
    bounds: tuple[int, int, int, int] | None = None


@dataclass(frozen=True)
class SynthSpec:
    width: int
    height: int
    num_frames: int
    objects: tuple[SynthObject, ...]
    seed: int = 0
    bounce: bool = True
    margin: int = 0  # bouncing keeps boxes this far from the frame border
    noise: float = 0.0  # std-dev in pixels of det.txt jitter; 0 means det == gt

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        try:
            objs = []
            for o in d["objects"]:
                o = dict(o)
                if "velocity" in o:
                    o["velocity"] = tuple(o["velocity"])
                if o.get("bounds") is not None:
                    o["bounds"] = tuple(o["bounds"])
                if o.get("velocities") is not None:
                    o["velocities"] = tuple(tuple(v) for v in o["velocities"])
                objs.append(SynthObject(**o))
            rest = {k: v for k, v in d.items() if k != "objects"}
            return cls(objects=tuple(objs), **rest)
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"bad synth spec: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "SynthSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot load synth spec {path}: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def trajectories(spec: SynthSpec) -> np.ndarray:
    """Integer top-left corners, shape (num_frames, num_objects, 2)."""
    if spec.num_frames < 1 or spec.width < 1 or spec.height < 1:
        raise InvalidInputError("frame count and frame size must be positive")
    pos = np.zeros((spec.num_frames, len(spec.objects), 2), dtype=np.int64)
    for k, o in enumerate(spec.objects):
        if o.w < 1 or o.h < 1:
            raise InvalidInputError(f"object {k} has non-positive size")
        x0, y0, x1, y1 = o.bounds or (spec.margin, spec.margin,
                                      spec.width - spec.margin, spec.height - spec.margin)
        lo = np.array([x0, y0])
        hi = np.array([x1 - o.w, y1 - o.h])
        p = np.array([o.x, o.y])
        v = np.array(o.velocity)
        if o.velocities is not None and len(o.velocities) != spec.num_frames - 1:
            raise InvalidInputError(
                f"object {k} lists {len(o.velocities)} velocities, expected {spec.num_frames - 1}")
        pos[0, k] = p
        for t in range(1, spec.num_frames):
            if o.velocities is not None:
                p = p + np.array(o.velocities[t - 1])
            else:
                nxt = p + v
                if spec.bounce:
                    flip = (nxt < lo) | (nxt > hi)
                    v = np.where(flip, -v, v)
                    nxt = p + v
                p = nxt
            pos[t, k] = p
    for t in range(spec.num_frames):
        for k, o in enumerate(spec.objects):
            x, y = pos[t, k]
            if x < 0 or y < 0 or x + o.w > spec.width or y + o.h > spec.height:
                raise InvalidInputError(f"object {k} leaves the frame at frame {t}")
            for j in range(k):
                q = spec.objects[j]
                qx, qy = pos[t, j]
                if x < qx + q.w and qx < x + o.w and y < qy + q.h and qy < y + o.h:
                    raise InvalidInputError(f"objects {j} and {k} overlap at frame {t}")
    return pos


@dataclass
class SynthSequence:
    frames: list[Frame]
    gt: GroundTruth
    dets: dict[int, DetectionSet]
    spec: SynthSpec = field(repr=False)


def generate(spec: SynthSpec) -> SynthSequence:
    pos = trajectories(spec)
    rng = np.random.default_rng(spec.seed)
    background = rng.integers(0, 256, (spec.height, spec.width), dtype=np.uint8)
    textures = [rng.integers(0, 256, (o.h, o.w), dtype=np.uint8) for o in spec.objects]
    noise_rng = np.random.default_rng([spec.seed, 1])

    frames, gt_boxes, dets = [], {}, {}
    for t in range(spec.num_frames):
        img = background.copy()
        boxes, ds = [], []
        for k, (o, tex) in enumerate(zip(spec.objects, textures)):
            x, y = (int(v) for v in pos[t, k])
            img[y:y + o.h, x:x + o.w] = tex
            boxes.append(GTBox(x, y, o.w, o.h, track_id=k + 1))
            if spec.noise > 0:
                jx, jy = noise_rng.normal(0.0, spec.noise, 2)
                score = float(noise_rng.uniform(0.5, 1.0))
                ds.append(Detection(x + float(jx), y + float(jy), o.w, o.h, score=score))
            else:
                ds.append(Detection(x, y, o.w, o.h, score=1.0))
        frames.append(Frame(t, img))
        gt_boxes[t] = tuple(boxes)
        dets[t] = DetectionSet(t, tuple(ds))
    return SynthSequence(frames, GroundTruth(spec.num_frames, gt_boxes), dets, spec)


def write_sequence(seq: SynthSequence, out_dir: str | Path) -> dict[str, Path]:
    """MOT-style layout: img1/, gt/gt.txt, det/det.txt, plus the spec as synth.json."""
    out = Path(out_dir)
    img_dir = out / "img1"
    write_frames(seq.frames, img_dir)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    (out / "det").mkdir(parents=True, exist_ok=True)
    write_gt(seq.gt, out / "gt" / "gt.txt")
    write_det(seq.dets, out / "det" / "det.txt")
    (out / "synth.json").write_text(json.dumps(seq.spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return {"frames": img_dir, "gt": out / "gt" / "gt.txt", "det": out / "det" / "det.txt"}


def lanes_spec(width: int = 320, height: int = 240, num_frames: int = 300, speed: int = 2,
               box: tuple[int, int] = (20, 40), seed: int = 0, margin: int = 16) -> SynthSpec:
    """Benchmark scene: boxes bouncing at ``speed`` px/frame in non-crossing lanes."""
    bw, bh = box
    if height < 2 * (margin + bh) or width < 2 * margin + bw + 1:
        raise InvalidInputError(f"{width}x{height} is too small for {bw}x{bh} lanes")
    objs: list[SynthObject] = []
    # Horizontal movers in rows along the top and bottom.
    for k, y in enumerate((margin, height - margin - bh)):
        x = margin + (k * 7 * speed) % max(1, width - 2 * margin - bw)
        objs.append(SynthObject(x, y, bw, bh, (speed if k % 2 == 0 else -speed, 0)))
    # Vertical movers in columns across the middle band.
    band = (margin + bh + 4, height - margin - bh - 4)
    span = band[1] - band[0] - bh
    # Frames too short for a middle band only get the two horizontal movers.
    cols = range(margin + 2 * bw, width - margin - 2 * bw, 3 * bw) if span > 0 else range(0)
    for k, x in enumerate(cols):
        y = band[0] + (k * 5 * speed) % max(1, span)
        objs.append(SynthObject(x, y, bw, bh, (0, speed if k % 2 == 0 else -speed),
                                bounds=(x, band[0], x + bw, band[1])))
    return SynthSpec(width, height, num_frames, tuple(objs), seed=seed, margin=margin)
