"""Second dynamic-programming pass: temporal trimming of action paths.

Every box of a path gets a binary label, the path's class or background,
maximizing

    sum_t unary(l_t) - lambda_l * sum_{t>=2} potts(l_t, l_{t-1})

where the Potts penalty is 0 for equal adjacent labels and alpha_c otherwise.
The optimum is found exactly with a two-state Viterbi pass. Maximal runs of
the class label become action tubes, each scored by the mean of its top-k
augmented class scores.

The detector emits no background score, so the background unary is a model
choice: the default ``complement`` mode uses max(0, 1 - raw) of the
pre-fusion class score; ``constant`` uses a fixed value. The foreground unary
uses the augmented score by default, switchable to the raw one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import ActionPath, ActionTube, Labelling, VideoDetections
from .pathing import PathConfig, adjacent_iou_matrices, extract_paths

_BACKGROUND_MODES = ("complement", "constant")
_FOREGROUND_MODES = ("augmented", "raw")


@dataclass(frozen=True)
class TrimConfig:
    """Trimming parameters.

    ``alpha`` is the per-class label-switch penalty: a scalar applied to all
    classes, a sequence indexed by class id, or a mapping from class id to
    value (ids missing from a mapping fall back to ``alpha_default``).
    """

    lambda_l: float = 1.0
    alpha: float | Sequence[float] | Mapping[int, float] = 1.0
    alpha_default: float = 1.0
    background_score_mode: str = "complement"
    background_constant: float = 0.5
    foreground_score_mode: str = "augmented"
    top_k: int = 40

    def __post_init__(self):
        if self.lambda_l < 0:
            raise ValueError(f"lambda_l must be >= 0, got {self.lambda_l}")
        if self.alpha_default < 0:
            raise ValueError(f"alpha_default must be >= 0, got {self.alpha_default}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.background_score_mode not in _BACKGROUND_MODES:
            raise ValueError(
                f"background_score_mode must be one of {_BACKGROUND_MODES}, "
                f"got {self.background_score_mode!r}"
            )
        if self.foreground_score_mode not in _FOREGROUND_MODES:
            raise ValueError(
                f"foreground_score_mode must be one of {_FOREGROUND_MODES}, "
                f"got {self.foreground_score_mode!r}"
            )
        if isinstance(self.alpha, (int, float)):
            if self.alpha < 0:
                raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        else:
            values = (
                self.alpha.values() if isinstance(self.alpha, Mapping) else self.alpha
            )
            if any(v < 0 for v in values):
                raise ValueError("all alpha values must be >= 0")

    def alpha_for(self, class_id: int) -> float:
        if isinstance(self.alpha, Mapping):
            return float(self.alpha.get(class_id, self.alpha_default))
        if isinstance(self.alpha, (int, float)):
            return float(self.alpha)
        return float(self.alpha[class_id])


def _unaries(path: ActionPath, cfg: TrimConfig) -> tuple[np.ndarray, np.ndarray]:
    fg = path.scores if cfg.foreground_score_mode == "augmented" else path.raw_scores
    if cfg.background_score_mode == "complement":
        bg = np.clip(1.0 - path.raw_scores, 0.0, None)
    else:
        bg = np.full(path.num_frames, cfg.background_constant, dtype=np.float64)
    return np.asarray(fg, dtype=np.float64), bg


def trim_path(path: ActionPath, cfg: TrimConfig = TrimConfig()) -> Labelling:
    """Optimal foreground/background labelling of a path.

    Returns a boolean array, True where the frame keeps the path's class
    label. Among equal-objective labellings the one preferring foreground at
    the first differing frame is returned.
    """
    fg, bg = _unaries(path, cfg)
    cost = cfg.lambda_l * cfg.alpha_for(path.class_id)
    u_fg = fg.tolist()
    u_bg = bg.tolist()
    n = len(u_fg)
    # Backward pass: best objective of the suffix starting at t, per label.
    suf_fg = [0.0] * n
    suf_bg = [0.0] * n
    suf_fg[n - 1] = u_fg[n - 1]
    suf_bg[n - 1] = u_bg[n - 1]
    for t in range(n - 2, -1, -1):
        nf, nb = suf_fg[t + 1], suf_bg[t + 1]
        suf_fg[t] = u_fg[t] + (nf if nf >= nb - cost else nb - cost)
        suf_bg[t] = u_bg[t] + (nb if nb >= nf - cost else nf - cost)
    # Forward reconstruction, foreground on ties.
    labels = np.zeros(n, dtype=bool)
    labels[0] = suf_fg[0] >= suf_bg[0]
    for t in range(1, n):
        if labels[t - 1]:
            labels[t] = suf_fg[t] >= suf_bg[t] - cost
        else:
            labels[t] = suf_fg[t] - cost >= suf_bg[t]
    return labels


def labelling_objective(path: ActionPath, labelling, cfg: TrimConfig = TrimConfig()) -> float:
    """Direct evaluation of the trimming objective for a given labelling."""
    fg, bg = _unaries(path, cfg)
    labelling = np.asarray(labelling, dtype=bool)
    if labelling.shape != (path.num_frames,):
        raise ValueError(
            f"labelling length {labelling.shape} does not match path length "
            f"{path.num_frames}"
        )
    cost = cfg.lambda_l * cfg.alpha_for(path.class_id)
    total = 0.0
    for t in range(path.num_frames):
        total += fg[t] if labelling[t] else bg[t]
        if t and labelling[t] != labelling[t - 1]:
            total -= cost
    return total


def tube_score(scores, top_k: int) -> float:
    """Mean of the min(top_k, len) largest augmented class scores."""
    scores = np.asarray(scores, dtype=np.float64)
    k = min(top_k, len(scores))
    top = np.sort(scores)[::-1][:k]
    return float(sum(top.tolist()) / k)


def cut_tubes(
    path: ActionPath, labelling, cfg: TrimConfig = TrimConfig()
) -> list[ActionTube]:
    """One tube per maximal foreground run; empty for all-background."""
    labelling = np.asarray(labelling, dtype=bool)
    if labelling.shape != (path.num_frames,):
        raise ValueError(
            f"labelling length {labelling.shape} does not match path length "
            f"{path.num_frames}"
        )
    tubes: list[ActionTube] = []
    t = 0
    n = path.num_frames
    while t < n:
        if not labelling[t]:
            t += 1
            continue
        start = t
        while t < n and labelling[t]:
            t += 1
        end = t - 1
        tubes.append(
            ActionTube(
                video_id=path.video_id,
                class_id=path.class_id,
                start=start,
                end=end,
                boxes=path.boxes[start : end + 1].copy(),
                score=tube_score(path.scores[start : end + 1], cfg.top_k),
            )
        )
    return tubes


def paths_as_tubes(
    paths: Sequence[ActionPath], cfg: TrimConfig = TrimConfig()
) -> list[ActionTube]:
    """One-pass baseline: emit untrimmed full-length paths as tubes."""
    return [
        ActionTube(
            video_id=p.video_id,
            class_id=p.class_id,
            start=0,
            end=p.num_frames - 1,
            boxes=p.boxes.copy(),
            score=tube_score(p.scores, cfg.top_k),
        )
        for p in paths
    ]


def trim_paths(
    paths: Sequence[ActionPath], cfg: TrimConfig = TrimConfig()
) -> list[ActionTube]:
    """Label and cut a batch of paths, preserving order."""
    tubes: list[ActionTube] = []
    for path in paths:
        tubes.extend(cut_tubes(path, trim_path(path, cfg), cfg))
    return tubes


def build_tubes(
    video: VideoDetections,
    path_cfg: PathConfig = PathConfig(),
    trim_cfg: TrimConfig = TrimConfig(),
) -> list[ActionTube]:
    """Full second stage for one video: link, label, cut, for every class.

    Output order is (class id, extraction index, start frame).
    """
    iou_mats = adjacent_iou_matrices(video)
    tubes: list[ActionTube] = []
    for class_id in range(video.num_classes):
        paths = extract_paths(video, class_id, path_cfg, iou_mats=iou_mats)
        tubes.extend(trim_paths(paths, trim_cfg))
    return tubes
