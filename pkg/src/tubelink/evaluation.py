"""Score predicted tubes against ground truth.

Tube overlap is spatiotemporal IoU: temporal IoU of the two frame ranges
times the mean spatial IoU over the frames both tubes occupy. Detection AP
follows the standard protocol: predictions sorted by descending score are
greedily matched one-to-one to the unmatched ground-truth tube of highest
overlap, a prediction is a true positive iff that overlap is >= delta
(inclusive), and AP is the area under the interpolated precision-recall
curve. mAP averages APs over the classes present in the ground truth; classes
without ground truth have undefined AP and are excluded.

Classification accuracy predicts, per video, the class of its highest-scored
tube and checks it against the video's ground-truth class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .data import ActionTube, ClassCatalog, GroundTruthTube
from .geometry import paired_iou


@dataclass(frozen=True)
class EvalConfig:
    """``deltas`` are the spatiotemporal overlap thresholds, ascending.

    ``matching`` names the only implemented protocol: one-to-one greedy by
    descending tube score.
    """

    deltas: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    matching: str = "greedy"

    def __post_init__(self):
        if not self.deltas:
            raise ValueError("at least one delta is required")
        if any(not 0.0 < d <= 1.0 for d in self.deltas):
            raise ValueError(f"deltas must lie in (0, 1], got {self.deltas}")
        if list(self.deltas) != sorted(self.deltas):
            raise ValueError(f"deltas must be ascending, got {self.deltas}")
        if self.matching != "greedy":
            raise ValueError(f"unsupported matching protocol {self.matching!r}")
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))


def temporal_iou(start_a: int, end_a: int, start_b: int, end_b: int) -> float:
    """IoU of two inclusive integer frame ranges."""
    inter = min(end_a, end_b) - max(start_a, start_b) + 1
    if inter <= 0:
        return 0.0
    union = (end_a - start_a + 1) + (end_b - start_b + 1) - inter
    return inter / union


def tube_iou(a: ActionTube | GroundTruthTube, b: ActionTube | GroundTruthTube) -> float:
    """Spatiotemporal overlap of two tubes of the same video.

    Zero when the frame ranges are disjoint; symmetric in its arguments.
    """
    if a.video_id != b.video_id:
        raise ValueError(
            f"tube_iou across videos: {a.video_id!r} vs {b.video_id!r}"
        )
    t_iou = temporal_iou(a.start, a.end, b.start, b.end)
    if t_iou == 0.0:
        return 0.0
    lo = max(a.start, b.start)
    hi = min(a.end, b.end)
    ious = paired_iou(
        a.boxes[lo - a.start : hi - a.start + 1],
        b.boxes[lo - b.start : hi - b.start + 1],
    )
    # Sequential summation keeps the value independent of array layout.
    spatial = sum(ious.tolist()) / (hi - lo + 1)
    return t_iou * spatial


def _match_predictions(
    preds: Sequence[ActionTube],
    gts: Sequence[GroundTruthTube],
    delta: float,
) -> tuple[list[bool], list[tuple[int, int]]]:
    """Greedy one-to-one matching in descending-score order.

    Returns (true-positive flags aligned to that order, matched (pred, gt)
    index pairs into the input sequences).
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    matched = [False] * len(gts)
    flags: list[bool] = []
    pairs: list[tuple[int, int]] = []
    for i in order:
        pred = preds[i]
        best_iou = 0.0
        best_j = -1
        for j, gt in enumerate(gts):
            if matched[j] or gt.video_id != pred.video_id or gt.class_id != pred.class_id:
                continue
            overlap = tube_iou(pred, gt)
            if overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0 and best_iou >= delta:
            matched[best_j] = True
            flags.append(True)
            pairs.append((i, best_j))
        else:
            flags.append(False)
    return flags, pairs


def _ap_from_flags(flags: Sequence[bool], num_gt: int) -> float:
    """All-points interpolated AP from ranked true-positive flags."""
    if num_gt == 0:
        raise ValueError("AP is undefined without ground truth")
    recalls: list[float] = []
    precisions: list[float] = []
    tp = 0
    for rank, flag in enumerate(flags, 1):
        tp += flag
        recalls.append(tp / num_gt)
        precisions.append(tp / rank)
    # Precision envelope from the right, then sum recall increments.
    best = 0.0
    envelope = [0.0] * len(precisions)
    for i in range(len(precisions) - 1, -1, -1):
        if precisions[i] > best:
            best = precisions[i]
        envelope[i] = best
    ap = 0.0
    prev_recall = 0.0
    for r, p in zip(recalls, envelope):
        ap += (r - prev_recall) * p
        prev_recall = r
    return ap


def average_precision(
    preds: Sequence[ActionTube],
    gts: Sequence[GroundTruthTube],
    delta: float,
) -> float | None:
    """Detection AP for one class at one overlap threshold.

    ``preds`` and ``gts`` are expected to belong to a single class; matching
    additionally requires identical video and class ids. Returns None when
    there is no ground truth (AP undefined).
    """
    if not gts:
        return None
    flags, _ = _match_predictions(preds, gts, delta)
    return _ap_from_flags(flags, len(gts))


def pr_points(
    preds: Sequence[ActionTube],
    gts: Sequence[GroundTruthTube],
    delta: float,
) -> list[tuple[float, float, float]]:
    """(recall, precision, score) per rank, for external plotting."""
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    flags, _ = _match_predictions(preds, gts, delta)
    points = []
    tp = 0
    for rank, (i, flag) in enumerate(zip(order, flags), 1):
        tp += flag
        points.append((tp / len(gts) if gts else 0.0, tp / rank, preds[i].score))
    return points


@dataclass
class EvalReport:
    """APs and mAP per overlap threshold plus classification accuracy.

    ``ap[delta][class_id]`` may be None for classes that appear only in the
    predictions (no ground truth, AP undefined, excluded from mAP).
    """

    deltas: tuple[float, ...]
    class_ids: tuple[int, ...]
    ap: dict[float, dict[int, float | None]]
    mean_ap: dict[float, float | None]
    accuracy: float | None
    per_video: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "deltas": list(self.deltas),
            "class_ids": list(self.class_ids),
            "ap": {
                repr(d): {str(c): self.ap[d][c] for c in self.class_ids}
                for d in self.deltas
            },
            "mean_ap": {repr(d): self.mean_ap[d] for d in self.deltas},
            "accuracy": self.accuracy,
            "per_video": self.per_video,
        }

    def format_table(self, catalog: ClassCatalog | None = None) -> str:
        """Human-readable table, thresholds across the columns."""

        def name(c: int) -> str:
            return catalog.name_of(c) if catalog is not None else f"class {c}"

        label_width = max(
            [len("overlap threshold"), len("mAP")] + [len(name(c)) for c in self.class_ids]
        )
        cols = [f"{d:g}" for d in self.deltas]
        col_width = max([6] + [len(c) for c in cols])

        def row(label: str, values: list[str]) -> str:
            cells = "  ".join(v.rjust(col_width) for v in values)
            return f"{label.ljust(label_width)}  {cells}"

        def fmt(v: float | None) -> str:
            return "--" if v is None else f"{v:.4f}"

        lines = [row("overlap threshold", cols)]
        lines.append("-" * len(lines[0]))
        for c in self.class_ids:
            lines.append(row(name(c), [fmt(self.ap[d][c]) for d in self.deltas]))
        lines.append(row("mAP", [fmt(self.mean_ap[d]) for d in self.deltas]))
        if self.accuracy is not None:
            lines.append(f"classification accuracy: {self.accuracy:.4f}")
        return "\n".join(lines)


def _video_prediction(tubes: list[ActionTube]) -> int | None:
    """Class of the highest-scored tube; ties prefer the lower class id."""
    if not tubes:
        return None
    best = min(tubes, key=lambda t: (-t.score, t.class_id, t.start, t.end))
    return best.class_id


def evaluate(
    tubes: Sequence[ActionTube],
    ground_truth: Sequence[GroundTruthTube],
    cfg: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Full report: per-class AP and mAP per delta, accuracy, diagnostics."""
    class_ids = tuple(
        sorted({t.class_id for t in tubes} | {g.class_id for g in ground_truth})
    )
    preds_by_class: dict[int, list[ActionTube]] = {c: [] for c in class_ids}
    gts_by_class: dict[int, list[GroundTruthTube]] = {c: [] for c in class_ids}
    for t in tubes:
        preds_by_class[t.class_id].append(t)
    for g in ground_truth:
        gts_by_class[g.class_id].append(g)

    ap: dict[float, dict[int, float | None]] = {}
    mean_ap: dict[float, float | None] = {}
    matched_by_video: dict[str, dict[float, int]] = {}
    for delta in cfg.deltas:
        per_class: dict[int, float | None] = {}
        for c in class_ids:
            class_preds = preds_by_class[c]
            class_gts = gts_by_class[c]
            if not class_gts:
                per_class[c] = None
                continue
            flags, pairs = _match_predictions(class_preds, class_gts, delta)
            per_class[c] = _ap_from_flags(flags, len(class_gts))
            for _, j in pairs:
                video_id = class_gts[j].video_id
                counts = matched_by_video.setdefault(video_id, {})
                counts[delta] = counts.get(delta, 0) + 1
        defined = [v for v in per_class.values() if v is not None]
        ap[delta] = per_class
        mean_ap[delta] = sum(defined) / len(defined) if defined else None

    # Classification accuracy over videos that have ground truth.
    tubes_by_video: dict[str, list[ActionTube]] = {}
    for t in tubes:
        tubes_by_video.setdefault(t.video_id, []).append(t)
    gt_classes_by_video: dict[str, set[int]] = {}
    for g in ground_truth:
        gt_classes_by_video.setdefault(g.video_id, set()).add(g.class_id)

    per_video = []
    correct = 0
    for video_id in sorted(gt_classes_by_video):
        predicted = _video_prediction(tubes_by_video.get(video_id, []))
        gt_classes = sorted(gt_classes_by_video[video_id])
        num_gt = sum(1 for g in ground_truth if g.video_id == video_id)
        ok = predicted is not None and predicted in gt_classes
        correct += ok
        matched = matched_by_video.get(video_id, {})
        per_video.append(
            {
                "video_id": video_id,
                "num_pred_tubes": len(tubes_by_video.get(video_id, [])),
                "num_gt_tubes": num_gt,
                "matched_gt_per_delta": {
                    repr(d): matched.get(d, 0) for d in cfg.deltas
                },
                "predicted_class": predicted,
                "gt_classes": gt_classes,
                "classification_correct": bool(ok),
            }
        )
    accuracy = correct / len(gt_classes_by_video) if gt_classes_by_video else None

    return EvalReport(
        deltas=cfg.deltas,
        class_ids=class_ids,
        ap=ap,
        mean_ap=mean_ap,
        accuracy=accuracy,
        per_video=per_video,
    )
