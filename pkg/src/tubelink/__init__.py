"""tubelink: two-stream detections to scored action tubes, plus evaluation.

The pipeline fuses appearance and motion detection scores by spatial
overlap, links boxes into class-specific full-video paths with a Viterbi
pass, temporally trims the paths with a second Potts-smoothed Viterbi pass,
and scores tubes against ground truth with spatiotemporal-IoU average
precision.
"""

from .data import (
    ActionPath,
    ActionTube,
    ClassCatalog,
    DataError,
    DetectionBox,
    FrameDetections,
    GroundTruthTube,
    Labelling,
    VideoDetections,
    load_detections,
    load_ground_truth,
    load_paths,
    load_tubes,
    save_detections,
    save_ground_truth,
    save_paths,
    save_tubes,
)
from .estimators import ActionTubeDetector, PathLinker, ScoreFusion, TubeTrimmer
from .evaluation import EvalConfig, EvalReport, average_precision, evaluate, tube_iou
from .fusion import FusionConfig, fuse_frame, fuse_video
from .geometry import area, iou, iou_matrix
from .pathing import PathConfig, best_path, extract_paths, path_energy
from .pipeline import PipelineConfig, fuse_link_trim, run_pipeline
from .synth import ScenarioSpec, PlantSpec, generate
from .trimming import TrimConfig, build_tubes, cut_tubes, trim_path, tube_score

__version__ = "0.1.0"

__all__ = [
    "ActionPath",
    "ActionTube",
    "ActionTubeDetector",
    "ClassCatalog",
    "DataError",
    "DetectionBox",
    "EvalConfig",
    "EvalReport",
    "FrameDetections",
    "FusionConfig",
    "GroundTruthTube",
    "Labelling",
    "PathConfig",
    "PathLinker",
    "PipelineConfig",
    "PlantSpec",
    "ScenarioSpec",
    "ScoreFusion",
    "TrimConfig",
    "TubeTrimmer",
    "VideoDetections",
    "area",
    "average_precision",
    "best_path",
    "build_tubes",
    "cut_tubes",
    "evaluate",
    "extract_paths",
    "fuse_frame",
    "fuse_link_trim",
    "fuse_video",
    "generate",
    "iou",
    "iou_matrix",
    "load_detections",
    "load_ground_truth",
    "load_paths",
    "load_tubes",
    "path_energy",
    "run_pipeline",
    "save_detections",
    "save_ground_truth",
    "save_paths",
    "save_tubes",
    "trim_path",
    "tube_iou",
    "tube_score",
]
