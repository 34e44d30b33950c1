"""Detector-agnostic video object detection by motion-vector box propagation."""

from .detectors import (Detector, DetectorRequest, DetectorResponse, DetectorSpec, FileOracle,
                        FileOracleSpec, FixedFrames, FixedWallClock, PerRequestSchedule,
                        ScriptedMock, ScriptedMockSpec, detect)
from .errors import (BufferOverflowError, ConfigError, InvalidInputError, MovexError, ParseError,
                     PipelineError)
from .evaluation import APReport, GroundTruth, GTBox, average_precision, hold_last_baseline, iou
from .frames import Frame, load_frames, read_pgm, write_pgm
from .motion import (MotionEstimatorParams, MotionVector, MotionVectorField, SearchMethod,
                     estimate_motion, estimate_sequence)
from .mvf import read_mvf, write_mvf
from .pipeline import (EstimatorFlow, FrameResult, Mode, PipelineConfig, PipelineState,
                       SidecarFlow, measure_latency, run_pipeline, step)
from .propagation import (AggregationKind, Detection, DetectionSet, FlowBuffer, aggregate,
                          enclosed_vectors, propagate, replay)

__version__ = "0.1.0"
