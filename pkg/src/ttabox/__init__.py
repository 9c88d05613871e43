"""Test-time augmentation toolkit for object detection.

Plans multiscale / flipped inference views, maps per-view detections back
into original-image coordinates, merges them with weighted boxes fusion, and
scores the result with AP at a configurable IoU threshold. A synthetic
benchmark with a resolution-aware noisy detector stands in for a real model.
"""

__version__ = "0.1.0"

from .errors import (
    DetectorError,
    FileFormatError,
    GenerationError,
    TtaboxError,
    UndefinedMetricError,
    ValidationError,
)
from .geometry import Box, ImageDims, area, clamp_to_image, flip_h, flip_v, iou, scale
from .fusion import (
    Detection,
    FusedDetection,
    FusionConfig,
    nms,
    soft_nms,
    wbf,
)
from .tta import (
    DetectorAdapter,
    ImageRecord,
    LetterboxParams,
    TtaStats,
    ViewPlan,
    ViewSpec,
    default_view_plan,
    letterbox_params,
    make_view_plan,
    original_to_view,
    run_tta,
    view_to_original,
)
from .evaluation import (
    Counts,
    EvalReport,
    GroundTruth,
    MatchLabel,
    average_precision,
    evaluate,
    match_detections,
)
from .synth import (
    NoiseModel,
    ScoreModel,
    SynthConfig,
    SyntheticDetector,
    generate_dataset,
    synthetic_detector,
)
from .adapters import FileDetectorAdapter, SubprocessDetectorAdapter
from .coco_io import (
    Category,
    Dataset,
    DetectionRecords,
    load_dataset,
    load_detections,
    load_plan,
    save_dataset,
    save_detections,
    save_plan,
)
from .pipeline import (
    BUILTIN_STRATEGIES,
    Strategy,
    fuse_detection_files,
    run_synth_bench,
)

__all__ = [
    "__version__",
    # errors
    "TtaboxError", "ValidationError", "FileFormatError", "DetectorError",
    "GenerationError", "UndefinedMetricError",
    # geometry
    "Box", "ImageDims", "area", "iou", "flip_h", "flip_v", "scale", "clamp_to_image",
    # fusion
    "Detection", "FusionConfig", "FusedDetection", "wbf", "nms", "soft_nms",
    # tta
    "ViewSpec", "ViewPlan", "ImageRecord", "DetectorAdapter", "LetterboxParams",
    "TtaStats", "default_view_plan", "make_view_plan", "letterbox_params",
    "original_to_view", "view_to_original", "run_tta",
    # evaluation
    "GroundTruth", "EvalReport", "Counts", "MatchLabel",
    "match_detections", "average_precision", "evaluate",
    # synth
    "SynthConfig", "NoiseModel", "ScoreModel", "generate_dataset",
    "synthetic_detector", "SyntheticDetector",
    # adapters
    "FileDetectorAdapter", "SubprocessDetectorAdapter",
    # io
    "Dataset", "Category", "DetectionRecords",
    "load_dataset", "save_dataset", "load_detections", "save_detections",
    "load_plan", "save_plan",
    # pipeline
    "Strategy", "BUILTIN_STRATEGIES", "fuse_detection_files", "run_synth_bench",
]
