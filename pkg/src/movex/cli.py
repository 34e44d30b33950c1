"""Command-line entry point: ``movex {run,estimate-flow,synth,eval,bench}``."""

from __future__ import annotations

import argparse
import dataclasses
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .detectors import (DetectorSpec, FileOracleSpec, FixedFrames, FixedWallClock,
                        PerRequestSchedule, ScriptedMockSpec)
from .errors import ConfigError, MovexError, PipelineError
from .evaluation import average_precision
from .frames import load_frames
from .motfile import read_det, read_gt, write_det
from .motion import MotionEstimatorParams, SearchMethod, estimate_sequence
from .mvf import write_mvf
from .pipeline import (EstimatorFlow, Mode, PipelineConfig, SidecarFlow, measure_latency,
                       run_pipeline)
from .propagation import DEFAULT_BUFFER_CAPACITY, AggregationKind
from .synth import SynthSpec, generate, lanes_spec, write_sequence

log = logging.getLogger("movex")

DEFAULTS = {
    "flow": "estimate",
    "block_size": 16,
    "search_range": 16,
    "search": "full",
    "zero_bias": 0.0,
    "agg": "median",
    "det_latency": "frames:0",
    "score_threshold": 0.0,
    "mode": "deterministic",
    "buffer_capacity": DEFAULT_BUFFER_CAPACITY,
    "fps": 30.0,
    "iou": 0.5,
    "seed": None,
}


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from --config, then from DEFAULTS. Flags always win."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config}: line {exc.lineno}: {exc.msg}") from None
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for key, value in vars(args).items():
        if value is None:
            if key in cfg:
                setattr(args, key, cfg[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    return args


def _estimator_params(args) -> MotionEstimatorParams:
    return MotionEstimatorParams(int(args.block_size), int(args.search_range),
                                 SearchMethod(args.search), float(args.zero_bias))


def _flow_source(args):
    if args.flow == "estimate":
        return EstimatorFlow(_estimator_params(args))
    if args.flow.startswith("sidecar:"):
        path = args.flow.split(":", 1)[1]
        if not os.path.isfile(path):
            raise ConfigError(f"sidecar file not found: {path}")
        return SidecarFlow(path)
    raise ConfigError(f"--flow must be 'estimate' or 'sidecar:PATH', got {args.flow!r}")


def _latency(text: str):
    kind, _, value = str(text).partition(":")
    try:
        if kind == "frames":
            return FixedFrames(int(value))
        if kind == "ms":
            return FixedWallClock(float(value))
    except ValueError:
        raise ConfigError(f"bad --det-latency value {text!r}") from None
    if kind == "schedule":
        return PerRequestSchedule.from_file(value)
    raise ConfigError(f"--det-latency must be frames:N, ms:N or schedule:PATH, got {text!r}")


def _detector(args) -> DetectorSpec:
    if not args.detector:
        raise ConfigError("--detector is required")
    kind, _, path = str(args.detector).partition(":")
    if not os.path.isfile(path):
        raise ConfigError(f"detector file not found: {path}")
    if kind == "oracle":
        spec = FileOracleSpec(path, float(args.score_threshold))
    elif kind == "mock":
        spec = ScriptedMockSpec(path)
    else:
        raise ConfigError(f"--detector must be oracle:PATH or mock:PATH, got {args.detector!r}")
    return DetectorSpec(spec, _latency(args.det_latency))


def _check_writable(path: str | None) -> None:
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(f"cannot write to {path}: directory missing or not writable")


def _check_frames_dir(path: str | None) -> None:
    if not path:
        raise ConfigError("--frames is required")
    if not Path(path).is_dir():
        raise ConfigError(f"frame directory not found: {path}")


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        detector=_detector(args),
        flow=_flow_source(args),
        aggregation=AggregationKind(args.agg),
        buffer_capacity=int(args.buffer_capacity),
        mode=Mode(args.mode),
        fps=float(args.fps),
    )


def _run(args):
    _check_frames_dir(args.frames)
    for p in (getattr(args, "out_dets", None), args.out_stats, getattr(args, "csv", None)):
        _check_writable(p)
    cfg = _pipeline_config(args)
    frames = load_frames(args.frames)
    results = run_pipeline(frames, cfg)
    return frames, cfg, results


def cmd_run(args) -> int:
    frames, cfg, results = _run(args)
    if args.out_dets:
        write_det([r.detections for r in results], args.out_dets)
    stats = measure_latency(results).to_dict()
    stats.update(mode=cfg.mode.value, aggregation=cfg.aggregation.value, flow=str(args.flow),
                 det_latency=str(args.det_latency))
    text = json.dumps(stats, indent=2, sort_keys=True)
    if args.out_stats:
        Path(args.out_stats).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_bench(args) -> int:
    frames, cfg, results = _run(args)
    summary = measure_latency(results)
    stats = summary.to_dict()
    stats.update(width=frames[0].width, height=frames[0].height, mode=cfg.mode.value)
    if args.out_stats:
        Path(args.out_stats).write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "step_latency_ms", "prior_age", "updated", "boxes"])
            for r in results:
                w.writerow([r.frame_index, f"{r.step_latency * 1000:.4f}", r.prior_age,
                            int(r.updated), len(r.detections)])
    lat = stats["step_latency_ms"]
    print(f"frames={summary.count} {frames[0].width}x{frames[0].height} "
          f"step_ms mean={lat['mean']:.3f} median={lat['median']:.3f} "
          f"p95={lat['p95']:.3f} max={lat['max']:.3f} "
          f"prior_age mean={summary.prior_age_mean:.2f} max={summary.prior_age_max}")
    return 0


def cmd_estimate_flow(args) -> int:
    _check_frames_dir(args.frames)
    _check_writable(args.out)
    frames = load_frames(args.frames)
    if len(frames) < 2:
        raise ConfigError(f"need at least 2 frames, found {len(frames)} in {args.frames}")
    fields = estimate_sequence(frames, _estimator_params(args))
    write_mvf(fields, args.out)
    log.info("wrote %d fields to %s", len(fields), args.out)
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        spec = SynthSpec.from_file(args.spec)
    else:
        spec = lanes_spec(width=args.width, height=args.height, num_frames=args.num_frames,
                          speed=args.speed)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    if args.noise is not None:
        overrides["noise"] = float(args.noise)
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    paths = write_sequence(generate(spec), args.out)
    log.info("wrote %d frames to %s", spec.num_frames, paths["frames"])
    return 0


def cmd_eval(args) -> int:
    _check_writable(args.out)
    preds = read_det(args.pred)
    gt = read_gt(args.gt, num_frames=args.num_frames)
    report = average_precision(preds, gt, float(args.iou))
    text = report.to_json()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _add_flow_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--frames", metavar="DIR", help="directory of P5 PGM frames")
    p.add_argument("--block-size", type=int, metavar="N")
    p.add_argument("--search-range", type=int, metavar="N")
    p.add_argument("--search", choices=["full", "threestep"])
    p.add_argument("--zero-bias", type=float, metavar="MAD")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    _add_flow_flags(p)
    p.add_argument("--flow", metavar="{estimate|sidecar:PATH}")
    p.add_argument("--agg", choices=["median", "mean"])
    p.add_argument("--detector", metavar="{oracle:PATH|mock:PATH}")
    p.add_argument("--det-latency", metavar="{frames:N|ms:N|schedule:PATH}")
    p.add_argument("--score-threshold", type=float, metavar="X")
    p.add_argument("--mode", choices=["realtime", "deterministic"])
    p.add_argument("--buffer-capacity", type=int, metavar="N")
    p.add_argument("--fps", type=float, help="frame rate used to turn ms latencies into frames")
    p.add_argument("--out-stats", metavar="PATH")
    p.add_argument("--config", metavar="PATH", help="JSON file of flag values; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="movex", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate detector output through a frame sequence")
    _add_run_flags(p)
    p.add_argument("--out-dets", metavar="PATH")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="report per-frame step latency on a frame sequence")
    _add_run_flags(p)
    p.add_argument("--csv", metavar="PATH", help="per-frame latency table")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("estimate-flow", help="write an MVF sidecar for a frame sequence")
    _add_flow_flags(p)
    p.add_argument("--out", metavar="PATH", required=True)
    p.add_argument("--config", metavar="PATH")
    p.set_defaults(func=cmd_estimate_flow)

    p = sub.add_parser("synth", help="generate a synthetic MOT-style sequence")
    p.add_argument("--spec", metavar="PATH", help="trajectory JSON; default is the lanes scene")
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--noise", type=float, metavar="PX")
    p.add_argument("--num-frames", type=int, default=300)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--speed", type=int, default=2)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="average precision of a det file against gt")
    p.add_argument("--pred", metavar="PATH", required=True)
    p.add_argument("--gt", metavar="PATH", required=True)
    p.add_argument("--iou", type=float, metavar="X")
    p.add_argument("--num-frames", type=int, help="frame range of the ground truth")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_eval)
    return parser


def _diagnostic(exc: BaseException) -> str:
    if isinstance(exc, PipelineError):
        return str(exc)
    if isinstance(exc, ConfigError):
        return f"[config] {exc}"
    tb = exc.__traceback__
    while tb is not None and tb.tb_next is not None:
        tb = tb.tb_next
    module = tb.tb_frame.f_globals.get("__name__", "movex").rsplit(".", 1)[-1] if tb else "movex"
    return f"[{module}] {exc}"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(_resolve(args))
    except MovexError as exc:
        print(f"movex {args.command}: error: {_diagnostic(exc)}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"movex {args.command}: error: [io] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
