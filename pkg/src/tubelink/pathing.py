"""First dynamic-programming pass: link boxes into class-specific paths.

A path picks one detection box per frame over the whole video. Its energy is

    E = sum_t score_c(b_t) + lambda_o * sum_{t>=2} IoU(b_t, b_{t-1})

and ``best_path`` maximizes it exactly with a forward Viterbi pass (per-box
best cumulative energy plus backpointer) and a backward reconstruction.
``extract_paths`` then removes the winning boxes from the per-frame pools and
repeats, so multiple co-occurring instances of the same class each get their
own path.

Complexity is O(T * N^2) per class for N boxes per frame; the per-frame-pair
IoU matrices are class-independent and computed once per video. Videos and
classes are independent work items; extraction within one (video, class) is
inherently sequential because each round removes boxes from the pools.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ActionPath, VideoDetections
from .geometry import iou, iou_matrix

_POLICIES = ("skip-class", "stop")


class EmptyFrameError(Exception):
    """A frame has no candidate boxes, so no full-video path exists."""


@dataclass(frozen=True)
class PathConfig:
    """Linking parameters.

    ``lambda_o`` weights the pairwise overlap term against the unary scores.
    ``max_paths_per_class`` caps the recursive extraction. ``score_floor``
    (disabled at 0) drops boxes whose class score is below the floor from
    that class's candidate pool, as a performance lever.
    ``min_boxes_per_frame_policy`` names the empty-frame behaviour: with
    either value, a class whose pool has an empty frame before any extraction
    yields no paths, and exhaustion during recursion stops the extraction.
    """

    lambda_o: float = 1.0
    max_paths_per_class: int = 10
    min_boxes_per_frame_policy: str = "skip-class"
    score_floor: float = 0.0

    def __post_init__(self):
        if self.lambda_o < 0:
            raise ValueError(f"lambda_o must be >= 0, got {self.lambda_o}")
        if self.max_paths_per_class < 1:
            raise ValueError(
                f"max_paths_per_class must be >= 1, got {self.max_paths_per_class}"
            )
        if self.min_boxes_per_frame_policy not in _POLICIES:
            raise ValueError(
                f"min_boxes_per_frame_policy must be one of {_POLICIES}, "
                f"got {self.min_boxes_per_frame_policy!r}"
            )
        if self.score_floor < 0:
            raise ValueError(f"score_floor must be >= 0, got {self.score_floor}")


def path_energy(path, scores=None, lambda_o: float = 1.0) -> float:
    """Evaluate the path energy directly from boxes and class scores.

    Accepts either an ActionPath (``path_energy(p, lambda_o=...)``) or
    explicit ``(boxes, scores)`` arrays.
    """
    if isinstance(path, ActionPath):
        boxes, scores = path.boxes, path.scores
    else:
        boxes = path
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64)
    total = float(sum(scores.tolist()))
    for t in range(1, len(boxes)):
        total += lambda_o * iou(boxes[t], boxes[t - 1])
    return total


def adjacent_iou_matrices(video: VideoDetections) -> list[np.ndarray]:
    """IoU matrix for every adjacent frame pair; shared by all classes."""
    frames = video.frames
    return [
        iou_matrix(frames[t - 1].boxes, frames[t].boxes)
        for t in range(1, len(frames))
    ]


def _viterbi(unary: list[np.ndarray], scaled_iou: list[np.ndarray]) -> tuple[list[int], float]:
    """Maximize sum of unaries plus pre-scaled pairwise terms.

    Ties take the predecessor with the lower box index (argmax picks the
    first maximum), and likewise the lowest-index endpoint.
    """
    cum = unary[0].copy()
    back: list[np.ndarray] = []
    for t in range(1, len(unary)):
        cand = cum[:, None] + scaled_iou[t - 1]
        prev = cand.argmax(axis=0)
        cum = cand[prev, np.arange(cand.shape[1])] + unary[t]
        back.append(prev)
    end = int(cum.argmax())
    energy = float(cum[end])
    indices = [end]
    for prev in reversed(back):
        indices.append(int(prev[indices[-1]]))
    indices.reverse()
    return indices, energy


def _class_pool(video: VideoDetections, class_id: int, cfg: PathConfig):
    """Per-frame candidate scores and alive masks for one class."""
    unary = [f.scores[:, class_id].astype(np.float64) for f in video.frames]
    if cfg.score_floor > 0:
        alive = [u >= cfg.score_floor for u in unary]
    else:
        alive = [np.ones(len(u), dtype=bool) for u in unary]
    return unary, alive


def _build_path(video, class_id, indices, energy) -> ActionPath:
    boxes = np.stack(
        [video.frames[t].boxes[i] for t, i in enumerate(indices)]
    )
    scores = np.array(
        [video.frames[t].scores[i, class_id] for t, i in enumerate(indices)]
    )
    raw = np.array(
        [video.frames[t].raw[i, class_id] for t, i in enumerate(indices)]
    )
    return ActionPath(video.video_id, class_id, boxes, scores, raw, energy)


def best_path(
    video: VideoDetections,
    class_id: int,
    cfg: PathConfig = PathConfig(),
    _iou_mats: list[np.ndarray] | None = None,
) -> ActionPath:
    """Globally optimal full-video path for one class.

    Raises EmptyFrameError when some frame has no candidate box (after the
    optional score floor); ``extract_paths`` dispatches that case per the
    configured policy.
    """
    unary, alive = _class_pool(video, class_id, cfg)
    for t, mask in enumerate(alive):
        if not mask.any():
            raise EmptyFrameError(
                f"video {video.video_id!r}: frame {t + 1} has no candidate box "
                f"for class {class_id}"
            )
    mats = adjacent_iou_matrices(video) if _iou_mats is None else _iou_mats
    scaled = [cfg.lambda_o * m for m in mats]
    masked = [np.where(a, u, -np.inf) for u, a in zip(unary, alive)]
    indices, energy = _viterbi(masked, scaled)
    return _build_path(video, class_id, indices, energy)


def extract_paths(
    video: VideoDetections,
    class_id: int,
    cfg: PathConfig = PathConfig(),
    iou_mats: list[np.ndarray] | None = None,
) -> list[ActionPath]:
    """Greedy multi-instance extraction by recursive box removal.

    Repeats: take the best remaining path, remove its boxes from the pools,
    until some frame is exhausted or ``max_paths_per_class`` is reached.
    Returned in extraction order; energies are not guaranteed monotone.
    Paths are box-disjoint by construction.
    """
    unary, alive = _class_pool(video, class_id, cfg)
    if any(not mask.any() for mask in alive):
        return []
    mats = adjacent_iou_matrices(video) if iou_mats is None else iou_mats
    scaled = [cfg.lambda_o * m for m in mats]
    paths: list[ActionPath] = []
    while len(paths) < cfg.max_paths_per_class:
        masked = [np.where(a, u, -np.inf) for u, a in zip(unary, alive)]
        indices, energy = _viterbi(masked, scaled)
        paths.append(_build_path(video, class_id, indices, energy))
        exhausted = False
        for t, i in enumerate(indices):
            alive[t][i] = False
            if not alive[t].any():
                exhausted = True
        if exhausted:
            break
    return paths
