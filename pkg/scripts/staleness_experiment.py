#!/usr/bin/env python3
"""AP of propagated vs held-last detections on the lanes scene, across detector latencies.

    python3 scripts/staleness_experiment.py --latencies 0 5 15 30 --csv staleness.csv
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

from movex.detectors import DetectorSpec, FileOracle, FixedFrames
from movex.evaluation import average_precision, hold_last_baseline
from movex.motion import MotionEstimatorParams, estimate_sequence
from movex.pipeline import PipelineConfig, SidecarFlow, run_pipeline
from movex.propagation import AggregationKind
from movex.synth import generate, lanes_spec


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--latencies", type=int, nargs="+", default=[0, 5, 15, 30])
    ap.add_argument("--num-frames", type=int, default=300)
    ap.add_argument("--speed", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--block-size", type=int, default=8)
    ap.add_argument("--search-range", type=int, default=4)
    ap.add_argument("--agg", choices=["median", "mean"], default="median")
    ap.add_argument("--iou", type=float, default=0.5)
    ap.add_argument("--csv", help="write one row per latency")
    args = ap.parse_args(argv)

    seq = generate(lanes_spec(num_frames=args.num_frames, speed=args.speed, seed=args.seed))
    t0 = time.perf_counter()
    fields = tuple(estimate_sequence(seq.frames, MotionEstimatorParams(args.block_size, args.search_range)))
    print(f"flow: {len(fields)} fields in {time.perf_counter() - t0:.1f}s", file=sys.stderr)

    oracle = FileOracle(seq.dets)
    rows = []
    for L in args.latencies:
        cfg = PipelineConfig(DetectorSpec(oracle, FixedFrames(L)), flow=SidecarFlow(fields),
                             aggregation=AggregationKind(args.agg))
        prop = average_precision([r.detections for r in run_pipeline(seq.frames, cfg)], seq.gt, args.iou).ap
        held = average_precision(hold_last_baseline(seq.frames, oracle, FixedFrames(L)), seq.gt, args.iou).ap
        rows.append({"latency_frames": L, "movex_ap": prop, "hold_last_ap": held})
        print(f"L={L:3d}  movex AP={prop:.4f}  hold-last AP={held:.4f}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
