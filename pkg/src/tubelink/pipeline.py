"""End-to-end composition: fuse, link, and trim, with per-video fan-out.

Videos are independent work items; results are merged in sorted video-id
order, so the output is identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .data import ActionTube, StreamMismatch, VideoDetections
from .fusion import FusionConfig, fuse_video
from .pathing import PathConfig, adjacent_iou_matrices, extract_paths
from .trimming import TrimConfig, build_tubes, paths_as_tubes

WORKERS_ENV_VAR = "TUBELINK_WORKERS"


@dataclass(frozen=True)
class PipelineConfig:
    fusion: FusionConfig = FusionConfig()
    pathing: PathConfig = PathConfig()
    trimming: TrimConfig = TrimConfig()
    trim: bool = True  # False emits untrimmed full-length paths as tubes


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV_VAR, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def detect_tubes(fused: VideoDetections, cfg: PipelineConfig) -> list[ActionTube]:
    """Link and trim one already-fused video."""
    if cfg.trim:
        return build_tubes(fused, cfg.pathing, cfg.trimming)
    iou_mats = adjacent_iou_matrices(fused)
    tubes: list[ActionTube] = []
    for class_id in range(fused.num_classes):
        paths = extract_paths(fused, class_id, cfg.pathing, iou_mats=iou_mats)
        tubes.extend(paths_as_tubes(paths, cfg.trimming))
    return tubes


def fuse_link_trim(
    appearance: VideoDetections,
    motion: VideoDetections,
    cfg: PipelineConfig = PipelineConfig(),
) -> list[ActionTube]:
    """All three stages for one video."""
    return detect_tubes(fuse_video(appearance, motion, cfg.fusion), cfg)


def pair_streams(
    appearance: Sequence[VideoDetections], motion: Sequence[VideoDetections]
) -> list[tuple[VideoDetections, VideoDetections]]:
    """Match the two streams by video id; both sets must coincide."""
    by_id = {m.video_id: m for m in motion}
    missing = [a.video_id for a in appearance if a.video_id not in by_id]
    if missing:
        raise StreamMismatch(f"motion stream missing videos: {missing}")
    extra = set(by_id) - {a.video_id for a in appearance}
    if extra:
        raise StreamMismatch(f"motion stream has unmatched videos: {sorted(extra)}")
    return [(a, by_id[a.video_id]) for a in appearance]


def _run_one(args) -> list[ActionTube]:
    appearance, motion, cfg = args
    return fuse_link_trim(appearance, motion, cfg)


def run_pipeline(
    appearance: Sequence[VideoDetections],
    motion: Sequence[VideoDetections],
    cfg: PipelineConfig = PipelineConfig(),
    workers: int = 1,
) -> list[ActionTube]:
    """Fuse+link+trim a corpus, fanning out over videos.

    Output is sorted by video id and is byte-identical under any worker
    count (every stage is pure and per-video).
    """
    pairs = sorted(pair_streams(appearance, motion), key=lambda p: p[0].video_id)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    jobs = [(a, m, cfg) for a, m in pairs]
    if workers == 1 or len(jobs) <= 1:
        per_video = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_video = list(pool.map(_run_one, jobs, chunksize=1))
    tubes: list[ActionTube] = []
    for group in per_video:
        tubes.extend(group)
    return tubes
