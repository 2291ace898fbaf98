"""Boost appearance-stream scores with overlapping motion-stream detections.

For each appearance box and each class, the best-overlapping motion box (by
IoU) contributes its class score scaled by that overlap, provided the overlap
strictly exceeds ``tau``:

    fused = appearance_score + motion_score(best) * IoU(appearance, best)

Motion boxes are never emitted; box geometry is unchanged. IoU ties between
motion boxes are broken by the higher motion score for the class in question,
then by the lower list index (the index only affects which box is credited,
not the resulting score).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FrameDetections, StreamMismatch, VideoDetections
from .geometry import iou_matrix


@dataclass(frozen=True)
class FusionConfig:
    """``tau`` is the minimum IoU (strict) for a motion box to boost."""

    tau: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")


def fuse_frame(
    appearance: FrameDetections,
    motion: FrameDetections,
    cfg: FusionConfig = FusionConfig(),
) -> FrameDetections:
    """Fuse one frame; returns new appearance detections with boosted scores.

    The pre-fusion appearance scores are preserved in ``raw_scores`` of the
    result, which downstream trimming needs for its background model.
    """
    if appearance.scores.shape[1] != motion.scores.shape[1]:
        raise StreamMismatch(
            f"class count mismatch between streams: "
            f"{appearance.scores.shape[1]} vs {motion.scores.shape[1]}"
        )
    raw = appearance.raw.copy()
    fused = appearance.scores.copy()
    if len(appearance) and len(motion):
        overlap = iou_matrix(appearance.boxes, motion.boxes)      # (Na, Nm)
        best = overlap.max(axis=1)                                # (Na,)
        boosted = best > cfg.tau
        if np.any(boosted):
            # Among motion boxes tied at the maximum overlap, each class takes
            # the one with the highest class score.
            tied = overlap == best[:, None]
            cand = np.where(tied[:, :, None], motion.scores[None, :, :], -np.inf)
            tied_best = cand.max(axis=1)                          # (Na, C)
            fused[boosted] += best[boosted, None] * tied_best[boosted]
    return FrameDetections(boxes=appearance.boxes.copy(), scores=fused, raw_scores=raw)


def fuse_video(
    appearance: VideoDetections,
    motion: VideoDetections,
    cfg: FusionConfig = FusionConfig(),
) -> VideoDetections:
    """Frame-wise fusion of two streams of the same video."""
    if appearance.video_id != motion.video_id:
        raise StreamMismatch(
            f"video id mismatch: {appearance.video_id!r} vs {motion.video_id!r}"
        )
    if appearance.num_frames != motion.num_frames:
        raise StreamMismatch(
            f"video {appearance.video_id!r}: frame count mismatch "
            f"({appearance.num_frames} vs {motion.num_frames})"
        )
    if appearance.num_classes != motion.num_classes:
        raise StreamMismatch(
            f"video {appearance.video_id!r}: class count mismatch "
            f"({appearance.num_classes} vs {motion.num_classes})"
        )
    frames = [
        fuse_frame(a, m, cfg) for a, m in zip(appearance.frames, motion.frames)
    ]
    return VideoDetections(appearance.video_id, appearance.num_classes, frames)
