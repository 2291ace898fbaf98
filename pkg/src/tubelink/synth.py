"""Deterministic synthetic scenarios and exhaustive brute-force oracles.

Scenarios plant action instances (linear box trajectory, trapezoidal score
profile) among random clutter and emit an appearance stream, an independently
jittered motion stream, and the ground-truth tubes. Generation is a pure
function of the spec: the pseudo-random source is ``random.Random``, whose
stream is stable across interpreter releases, so golden corpora can be
checked into the repo.

The brute-force oracles maximize the linking and labelling objectives by
exhaustive enumeration and are the verification backbone for both dynamic
programming passes.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np

from .data import ActionPath, GroundTruthTube, FrameDetections, VideoDetections
from .geometry import iou
from .trimming import TrimConfig, _unaries

# Documented moderate-noise setting used by recovery experiments: box corners
# drift up to this many pixels and plant scores by this much per draw.
MODERATE_BOX_JITTER = 3.0
MODERATE_SCORE_NOISE = 0.05


class ScenarioError(ValueError):
    """The scenario spec is infeasible or out of bounds."""


@dataclass(frozen=True)
class PlantSpec:
    """One planted action instance.

    The box moves linearly from ``start_box`` to ``end_box`` over the frame
    range [start, end] (0-based, inclusive). The class score ramps linearly
    over ``ramp`` frames at each end of the range and plateaus at
    ``peak_score`` in between.
    """

    class_id: int
    start: int
    end: int
    start_box: tuple[float, float, float, float]
    end_box: tuple[float, float, float, float]
    peak_score: float = 0.9
    ramp: int = 0

    def trajectory(self) -> np.ndarray:
        a = np.asarray(self.start_box, dtype=np.float64)
        b = np.asarray(self.end_box, dtype=np.float64)
        n = self.end - self.start + 1
        if n == 1:
            return a.reshape(1, 4)
        steps = np.linspace(0.0, 1.0, n)[:, None]
        return a[None, :] * (1.0 - steps) + b[None, :] * steps

    def profile(self, t: int) -> float:
        """Score plateau with linear ramps, evaluated at absolute frame t."""
        rise = (t - self.start + 1) / (self.ramp + 1)
        fall = (self.end - t + 1) / (self.ramp + 1)
        return self.peak_score * min(1.0, rise, fall)


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    num_frames: int
    num_classes: int
    frame_size: tuple[float, float] = (320.0, 240.0)
    plants: tuple[PlantSpec, ...] = ()
    clutter_per_frame: int = 0
    clutter_score_range: tuple[float, float] = (0.01, 0.15)
    box_jitter: float = 0.0
    score_noise: float = 0.0
    video_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "plants", tuple(self.plants))
        if not self.video_id:
            object.__setattr__(self, "video_id", f"synth-{self.seed:08d}")


def _validate_spec(spec: ScenarioSpec) -> None:
    if spec.num_frames < 1 or spec.num_classes < 1:
        raise ScenarioError("num_frames and num_classes must be >= 1")
    if spec.clutter_per_frame < 0 or spec.box_jitter < 0 or spec.score_noise < 0:
        raise ScenarioError("clutter and noise settings must be >= 0")
    lo, hi = spec.clutter_score_range
    if not 0 <= lo <= hi <= 1:
        raise ScenarioError(f"bad clutter_score_range: {spec.clutter_score_range}")
    for p in spec.plants:
        if not 0 <= p.start <= p.end <= spec.num_frames - 1:
            raise ScenarioError(
                f"plant range [{p.start}, {p.end}] outside video of "
                f"{spec.num_frames} frames"
            )
        if not 0 <= p.class_id < spec.num_classes:
            raise ScenarioError(f"plant class id {p.class_id} out of range")
        if not 0 < p.peak_score <= 1:
            raise ScenarioError(f"peak_score must be in (0, 1], got {p.peak_score}")
        if p.ramp < 0:
            raise ScenarioError(f"ramp must be >= 0, got {p.ramp}")
        for box in (p.start_box, p.end_box):
            if box[2] <= box[0] or box[3] <= box[1]:
                raise ScenarioError(f"degenerate plant box {box}")
    # Two identical plants of one class on overlapping frames are unrecoverable.
    for i, a in enumerate(spec.plants):
        for b in spec.plants[i + 1 :]:
            if a.class_id != b.class_id:
                continue
            lo_t, hi_t = max(a.start, b.start), min(a.end, b.end)
            if lo_t > hi_t:
                continue
            ta, tb = a.trajectory(), b.trajectory()
            shared_a = ta[lo_t - a.start : hi_t - a.start + 1]
            shared_b = tb[lo_t - b.start : hi_t - b.start + 1]
            if np.allclose(shared_a, shared_b, atol=1e-9):
                raise ScenarioError(
                    "infeasible spec: overlapping identical plants for class "
                    f"{a.class_id}"
                )


def _jittered_box(box: np.ndarray, jitter: float, rng: random.Random) -> list[float]:
    dx = rng.uniform(-jitter, jitter)
    dy = rng.uniform(-jitter, jitter)
    dw = rng.uniform(-jitter, jitter)
    dh = rng.uniform(-jitter, jitter)
    x1, y1, x2, y2 = (float(v) for v in box)
    w = max(x2 - x1 + dw, 1.0)
    h = max(y2 - y1 + dh, 1.0)
    cx = (x1 + x2) / 2.0 + dx
    cy = (y1 + y2) / 2.0 + dy
    return [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0]


def _plant_scores(spec: ScenarioSpec, plant: PlantSpec, t: int, rng: random.Random) -> list[float]:
    lo, hi = spec.clutter_score_range
    row = [rng.uniform(lo, hi) for _ in range(spec.num_classes)]
    value = plant.profile(t) + rng.uniform(-spec.score_noise, spec.score_noise)
    row[plant.class_id] = min(max(value, 0.0), 1.0)
    return row


def _clutter_box(spec: ScenarioSpec, rng: random.Random) -> list[float]:
    width, height = spec.frame_size
    w = rng.uniform(0.05, 0.25) * width
    h = rng.uniform(0.05, 0.25) * height
    x1 = rng.uniform(0.0, width - w)
    y1 = rng.uniform(0.0, height - h)
    return [x1, y1, x1 + w, y1 + h]


def generate(
    spec: ScenarioSpec,
) -> tuple[VideoDetections, VideoDetections, list[GroundTruthTube]]:
    """Appearance stream, motion stream, and ground truth for a scenario."""
    _validate_spec(spec)
    rng = random.Random(spec.seed)
    trajectories = [p.trajectory() for p in spec.plants]
    app_frames: list[FrameDetections] = []
    mot_frames: list[FrameDetections] = []
    for t in range(spec.num_frames):
        app_boxes, app_scores = [], []
        mot_boxes, mot_scores = [], []
        for plant, traj in zip(spec.plants, trajectories):
            if not plant.start <= t <= plant.end:
                continue
            true_box = traj[t - plant.start]
            app_boxes.append(_jittered_box(true_box, spec.box_jitter, rng))
            app_scores.append(_plant_scores(spec, plant, t, rng))
            mot_boxes.append(_jittered_box(true_box, spec.box_jitter, rng))
            mot_scores.append(_plant_scores(spec, plant, t, rng))
        lo, hi = spec.clutter_score_range
        for _ in range(spec.clutter_per_frame):
            app_boxes.append(_clutter_box(spec, rng))
            app_scores.append([rng.uniform(lo, hi) for _ in range(spec.num_classes)])
            mot_boxes.append(_clutter_box(spec, rng))
            mot_scores.append([rng.uniform(lo, hi) for _ in range(spec.num_classes)])
        app_frames.append(
            FrameDetections(
                boxes=np.asarray(app_boxes, dtype=np.float64).reshape(len(app_boxes), 4),
                scores=np.asarray(app_scores, dtype=np.float64).reshape(
                    len(app_scores), spec.num_classes
                ),
            )
        )
        mot_frames.append(
            FrameDetections(
                boxes=np.asarray(mot_boxes, dtype=np.float64).reshape(len(mot_boxes), 4),
                scores=np.asarray(mot_scores, dtype=np.float64).reshape(
                    len(mot_scores), spec.num_classes
                ),
            )
        )
    appearance = VideoDetections(spec.video_id, spec.num_classes, app_frames).validate()
    motion = VideoDetections(spec.video_id, spec.num_classes, mot_frames).validate()
    ground_truth = [
        GroundTruthTube(
            video_id=spec.video_id,
            class_id=p.class_id,
            start=p.start,
            end=p.end,
            boxes=traj.copy(),
        )
        for p, traj in zip(spec.plants, trajectories)
    ]
    return appearance, motion, ground_truth


# ---------------------------------------------------------------------------
# Brute-force oracles

MAX_ENUMERATED_PATHS = 1_000_000
MAX_LABELLING_FRAMES = 20


def brute_force_best_path(
    video: VideoDetections, class_id: int, lambda_o: float
) -> tuple[list[int], float]:
    """Exhaustive maximum of the linking energy over all box selections.

    Returns (per-frame box indices, energy). Guarded against instances with
    more than ``MAX_ENUMERATED_PATHS`` paths.
    """
    counts = [len(f) for f in video.frames]
    if any(c == 0 for c in counts):
        raise ValueError("every frame needs at least one box to enumerate paths")
    total = 1
    for c in counts:
        total *= c
        if total > MAX_ENUMERATED_PATHS:
            raise ValueError(
                f"instance too large to enumerate (> {MAX_ENUMERATED_PATHS} paths)"
            )
    scores = [f.scores[:, class_id].tolist() for f in video.frames]
    boxes = [f.boxes for f in video.frames]
    overlap = [
        [
            [iou(boxes[t - 1][i], boxes[t][j]) for j in range(counts[t])]
            for i in range(counts[t - 1])
        ]
        for t in range(1, len(counts))
    ]
    best_combo: tuple[int, ...] | None = None
    best_energy = -np.inf
    for combo in itertools.product(*(range(c) for c in counts)):
        energy = scores[0][combo[0]]
        for t in range(1, len(combo)):
            energy += scores[t][combo[t]] + lambda_o * overlap[t - 1][combo[t - 1]][combo[t]]
        if energy > best_energy:
            best_energy = energy
            best_combo = combo
    return list(best_combo), float(best_energy)


def labelling_enumeration(
    fg_scores, bg_scores
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All 2^T labellings as (codes, unary totals, switch counts).

    Row i encodes the labelling whose frame-t label is foreground iff bit
    (T-1-t) of i is set, so larger codes prefer foreground at earlier frames.
    """
    fg = np.asarray(fg_scores, dtype=np.float64)
    bg = np.asarray(bg_scores, dtype=np.float64)
    n = len(fg)
    if n > MAX_LABELLING_FRAMES:
        raise ValueError(f"too many frames to enumerate labellings ({n} > {MAX_LABELLING_FRAMES})")
    codes = np.arange(1 << n, dtype=np.int64)
    labels = (codes[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    totals = labels @ fg + (1 - labels) @ bg
    switches = np.abs(np.diff(labels, axis=1)).sum(axis=1)
    return codes, totals, switches


def brute_force_best_labelling(
    path: ActionPath, cfg: TrimConfig = TrimConfig()
) -> tuple[np.ndarray, float]:
    """Exhaustive maximum of the trimming objective over all labellings.

    Returns (boolean foreground labelling, objective). Ties resolve to the
    labelling preferring foreground at the first differing frame, matching
    the dynamic-programming tie rule.
    """
    fg, bg = _unaries(path, cfg)
    cost = cfg.lambda_l * cfg.alpha_for(path.class_id)
    codes, totals, switches = labelling_enumeration(fg, bg)
    objective = totals - cost * switches
    best = objective.max()
    winner = int(codes[objective == best].max())
    n = path.num_frames
    labelling = np.array(
        [(winner >> (n - 1 - t)) & 1 == 1 for t in range(n)], dtype=bool
    )
    return labelling, float(best)
