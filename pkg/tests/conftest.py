import random

import numpy as np
import pytest

from tubelink.data import FrameDetections, VideoDetections


def random_box(rng: random.Random, extent: float = 100.0, min_size: float = 1.0):
    x1 = rng.uniform(0.0, extent - min_size)
    y1 = rng.uniform(0.0, extent - min_size)
    w = rng.uniform(min_size, extent - x1)
    h = rng.uniform(min_size, extent - y1)
    return [x1, y1, x1 + w, y1 + h]


def random_frame(rng: random.Random, num_boxes: int, num_classes: int,
                 score_high: float = 1.0) -> FrameDetections:
    boxes = [random_box(rng) for _ in range(num_boxes)]
    scores = [
        [rng.uniform(0.0, score_high) for _ in range(num_classes)]
        for _ in range(num_boxes)
    ]
    return FrameDetections(
        boxes=np.asarray(boxes, dtype=np.float64).reshape(num_boxes, 4),
        scores=np.asarray(scores, dtype=np.float64).reshape(num_boxes, num_classes),
    )


def random_video(rng: random.Random, num_frames: int, boxes_per_frame,
                 num_classes: int, video_id: str = "v") -> VideoDetections:
    """boxes_per_frame: int, or (lo, hi) range sampled per frame."""
    frames = []
    for _ in range(num_frames):
        if isinstance(boxes_per_frame, tuple):
            n = rng.randint(*boxes_per_frame)
        else:
            n = boxes_per_frame
        frames.append(random_frame(rng, n, num_classes))
    return VideoDetections(video_id, num_classes, frames).validate()


@pytest.fixture
def rng():
    return random.Random(1234)
