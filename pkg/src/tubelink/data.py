"""Canonical in-memory types and the line-delimited interchange format.

One JSON record per line, UTF-8. Frame indices are 1-based in files and
0-based in memory. Score vectors have one entry per action class; the
background label is not part of the catalog. Detection scores may exceed 1
after fusion, so no normalization is applied anywhere.

Loading validates every record; nothing partially valid is returned. Each
violation raises a distinct error class carrying the offending line number.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import as_boxes, validate_boxes


class DataError(Exception):
    """Base class for interchange-format and invariant violations."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedRecord(DataError):
    """Record is not valid JSON or is missing/mistyping a required field."""


class ScoreLengthMismatch(DataError):
    """A score vector does not match the expected number of classes."""


class DegenerateBox(DataError):
    """A box has non-positive area or non-finite coordinates."""


class BadFrameIndex(DataError):
    """Frame indices are not the contiguous 1-based sequence 1..num_frames."""


class StreamMismatch(DataError):
    """Appearance and motion streams disagree on id, length, or classes."""


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered action class names; ids are 0..C-1, background is id C."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("class catalog must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")
        if "background" in self.names:
            raise ValueError("'background' is reserved and cannot be a class name")
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))

    @property
    def num_classes(self) -> int:
        return len(self.names)

    @property
    def background_id(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown class name: {name!r}") from None

    def name_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise KeyError(f"class id out of range: {class_id}")
        return self.names[class_id]

    @classmethod
    def generic(cls, num_classes: int) -> "ClassCatalog":
        width = max(2, len(str(max(num_classes - 1, 0))))
        return cls(tuple(f"class_{i:0{width}d}" for i in range(num_classes)))


# A labelling assigns each path frame either the path's class (True) or
# background (False); produced by trimming, consumed by tube cutting.
Labelling = np.ndarray


@dataclass(frozen=True, eq=False)
class DetectionBox:
    """One detection: a box plus its per-class score vector."""

    box: np.ndarray        # (4,)
    scores: np.ndarray     # (C,)
    raw_scores: np.ndarray | None = None  # pre-fusion scores, when distinct


@dataclass
class FrameDetections:
    """All detections of one frame, array-backed for vectorized access.

    ``scores`` holds the current (possibly fused) per-class scores;
    ``raw_scores`` holds the pre-fusion scores and is only set by fusion.
    """

    boxes: np.ndarray                  # (N, 4) float64
    scores: np.ndarray                 # (N, C) float64
    raw_scores: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.boxes)

    def __getitem__(self, i: int) -> DetectionBox:
        raw = None if self.raw_scores is None else self.raw_scores[i]
        return DetectionBox(self.boxes[i], self.scores[i], raw)

    @property
    def raw(self) -> np.ndarray:
        """Pre-fusion scores; identical to ``scores`` when never fused."""
        return self.scores if self.raw_scores is None else self.raw_scores

    @classmethod
    def empty(cls, num_classes: int) -> "FrameDetections":
        return cls(np.zeros((0, 4)), np.zeros((0, num_classes)))


@dataclass
class VideoDetections:
    """Per-frame detections for one video, frames indexed 0..T-1."""

    video_id: str
    num_classes: int
    frames: list[FrameDetections]

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def validate(self) -> "VideoDetections":
        if self.num_frames < 1:
            raise MalformedRecord(f"video {self.video_id!r}: requires at least one frame")
        for t, fr in enumerate(self.frames):
            validate_boxes(fr.boxes, context=f"video {self.video_id!r} frame {t + 1}")
            for name, arr in (("scores", fr.scores), ("raw_scores", fr.raw_scores)):
                if name == "raw_scores" and arr is None:
                    continue
                if arr.shape != (len(fr.boxes), self.num_classes):
                    raise ScoreLengthMismatch(
                        f"video {self.video_id!r} frame {t + 1}: {name} shape "
                        f"{arr.shape}, expected ({len(fr.boxes)}, {self.num_classes})"
                    )
                if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr < 0)):
                    raise MalformedRecord(
                        f"video {self.video_id!r} frame {t + 1}: {name} must be finite and >= 0"
                    )
        return self


@dataclass
class ActionPath:
    """A class-specific box-per-frame sequence spanning the whole video.

    ``scores`` are the augmented (post-fusion) class scores used by the
    linking energy; ``raw_scores`` the pre-fusion ones needed by trimming's
    complement background model. ``energy`` is recomputable from the stored
    boxes and scores (see ``pathing.path_energy``).
    """

    video_id: str
    class_id: int
    boxes: np.ndarray        # (T, 4)
    scores: np.ndarray       # (T,)
    raw_scores: np.ndarray   # (T,)
    energy: float

    @property
    def num_frames(self) -> int:
        return len(self.boxes)


@dataclass
class ActionTube:
    """A contiguous, scored, class-labelled run of boxes.

    ``start``/``end`` are 0-based inclusive frame indices within the video;
    the file format stores them 1-based. The score is the mean of the top-k
    augmented class scores of the constituting boxes.
    """

    video_id: str
    class_id: int
    start: int
    end: int
    boxes: np.ndarray        # (end - start + 1, 4)
    score: float

    def validate(self) -> "ActionTube":
        _check_tube_fields(self.video_id, self.class_id, self.start, self.end, self.boxes)
        if not math.isfinite(self.score):
            raise MalformedRecord(f"tube in video {self.video_id!r}: non-finite score")
        return self


@dataclass
class GroundTruthTube:
    """Annotated tube: contiguous frame range with one box per frame."""

    video_id: str
    class_id: int
    start: int
    end: int
    boxes: np.ndarray

    def validate(self) -> "GroundTruthTube":
        _check_tube_fields(self.video_id, self.class_id, self.start, self.end, self.boxes)
        return self


def _check_tube_fields(video_id, class_id, start, end, boxes):
    if class_id < 0:
        raise MalformedRecord(f"tube in video {video_id!r}: negative class id")
    if start < 0 or end < start:
        raise MalformedRecord(
            f"tube in video {video_id!r}: invalid frame range [{start}, {end}]"
        )
    boxes = as_boxes(boxes)
    if len(boxes) != end - start + 1:
        raise MalformedRecord(
            f"tube in video {video_id!r}: {len(boxes)} boxes for range [{start}, {end}]"
        )
    try:
        validate_boxes(boxes, context=f"tube in video {video_id!r}")
    except ValueError as e:
        raise DegenerateBox(str(e)) from None


# ---------------------------------------------------------------------------
# Line-delimited interchange format


SCHEMA_TEXT = """\
tubelink interchange format: one JSON record per line, UTF-8.
Frame indices are 1-based and boxes are [x1, y1, x2, y2] with x2 > x1, y2 > y1.
Score vectors have one entry per action class (no background entry) and are
not normalized; fused scores may exceed 1.

detections file (streams, fused or not):
  {"video_id": str,
   "num_frames": int,
   "frames": [{"frame_index": int,              # 1..num_frames, in order
               "detections": [{"box": [f, f, f, f],
                               "scores": [f, ...],          # length C
                               "raw_scores": [f, ...]}]}]}  # optional, post-fusion
paths file (output of `link`):
  {"video_id": str, "class_id": int, "num_frames": int,
   "boxes": [[f, f, f, f], ...],    # one per frame
   "scores": [f, ...],              # augmented class scores, one per frame
   "raw_scores": [f, ...],          # pre-fusion class scores, one per frame
   "energy": f}
tubes file (output of `trim`/`pipeline`):
  {"video_id": str, "class_id": int,
   "start_frame": int, "end_frame": int,       # 1-based, inclusive
   "boxes": [[f, f, f, f], ...],               # end-start+1 entries
   "score": f}
ground truth file: as tubes but without "score".
class catalog file (optional, JSON, not line-delimited):
  {"classes": [str, ...]}
"""


def _atomic_write(path, lines: Iterable[str]) -> None:
    """Write lines to ``path`` atomically (temp file + rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tubelink-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            for line in lines:
                f.write(line)
                f.write("\n")
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)  # mkstemp creates 0600; honor the umask
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _records(path):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecord(f"invalid JSON: {e.msg}", line=lineno) from None
            if not isinstance(rec, dict):
                raise MalformedRecord("record is not a JSON object", line=lineno)
            yield lineno, rec


def _get(rec: dict, key: str, types, lineno: int):
    if key not in rec:
        raise MalformedRecord(f"missing field {key!r}", line=lineno)
    value = rec[key]
    if not isinstance(value, types):
        raise MalformedRecord(f"field {key!r} has wrong type", line=lineno)
    if isinstance(value, bool):  # bool passes isinstance(..., int)
        raise MalformedRecord(f"field {key!r} has wrong type", line=lineno)
    return value


def _float_list(values, what: str, lineno: int) -> list[float]:
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise MalformedRecord(f"{what} must be a list of numbers", line=lineno)
    return [float(v) for v in values]


def _parse_box(value, lineno: int) -> list[float]:
    box = _float_list(value, "box", lineno)
    if len(box) != 4:
        raise MalformedRecord("box must have 4 coordinates", line=lineno)
    if not all(math.isfinite(v) for v in box):
        raise DegenerateBox("box has non-finite coordinate", line=lineno)
    if box[2] <= box[0] or box[3] <= box[1]:
        raise DegenerateBox("degenerate box (requires x2 > x1 and y2 > y1)", line=lineno)
    return box


def load_detections(path, num_classes: int | None = None) -> list[VideoDetections]:
    """Load a detections file into validated ``VideoDetections``.

    ``num_classes`` fixes the expected score-vector length; when None it is
    inferred from the first detection in the file and enforced everywhere
    (a file with no detections at all cannot be inferred and is rejected).
    """
    parsed: list[tuple[str, list[tuple[list, list, list]]]] = []
    seen: set[str] = set()
    expected_c = num_classes
    last_line = None
    for lineno, rec in _records(path):
        last_line = lineno
        video_id = _get(rec, "video_id", str, lineno)
        if video_id in seen:
            raise MalformedRecord(f"duplicate video_id {video_id!r}", line=lineno)
        seen.add(video_id)
        num_frames = _get(rec, "num_frames", int, lineno)
        frames_field = _get(rec, "frames", list, lineno)
        if num_frames < 1:
            raise MalformedRecord("num_frames must be >= 1", line=lineno)
        if len(frames_field) != num_frames:
            raise MalformedRecord(
                f"num_frames is {num_frames} but {len(frames_field)} frames listed",
                line=lineno,
            )
        frames: list[tuple[list, list, list]] = []
        for pos, frame_rec in enumerate(frames_field, 1):
            if not isinstance(frame_rec, dict):
                raise MalformedRecord("frame entry is not an object", line=lineno)
            idx = _get(frame_rec, "frame_index", int, lineno)
            if idx != pos:
                raise BadFrameIndex(
                    f"frame_index {idx} at position {pos} (must be 1..T in order)",
                    line=lineno,
                )
            dets = _get(frame_rec, "detections", list, lineno)
            boxes, scores, raws = [], [], []
            for det in dets:
                if not isinstance(det, dict):
                    raise MalformedRecord("detection entry is not an object", line=lineno)
                boxes.append(_parse_box(_get(det, "box", list, lineno), lineno))
                vec = _float_list(_get(det, "scores", list, lineno), "scores", lineno)
                if expected_c is None:
                    expected_c = len(vec)
                if len(vec) != expected_c or expected_c == 0:
                    raise ScoreLengthMismatch(
                        f"scores has length {len(vec)}, expected {expected_c}",
                        line=lineno,
                    )
                if not all(math.isfinite(v) and v >= 0 for v in vec):
                    raise MalformedRecord("scores must be finite and >= 0", line=lineno)
                scores.append(vec)
                if "raw_scores" in det:
                    raw = _float_list(det["raw_scores"], "raw_scores", lineno)
                    if len(raw) != expected_c:
                        raise ScoreLengthMismatch(
                            f"raw_scores has length {len(raw)}, expected {expected_c}",
                            line=lineno,
                        )
                    raws.append(raw)
            if raws and len(raws) != len(scores):
                raise MalformedRecord(
                    "raw_scores present on some detections but not all", line=lineno
                )
            frames.append((boxes, scores, raws))
        parsed.append((video_id, frames))
    if expected_c is None:
        if parsed:
            raise ScoreLengthMismatch(
                "cannot infer number of classes from a file with no detections; "
                "pass num_classes explicitly",
                line=last_line,
            )
        return []
    videos: list[VideoDetections] = []
    for video_id, raw_frames in parsed:
        frames = [
            FrameDetections(
                boxes=np.asarray(boxes, dtype=np.float64).reshape(len(boxes), 4),
                scores=np.asarray(scores, dtype=np.float64).reshape(
                    len(scores), expected_c
                ),
                raw_scores=(
                    np.asarray(raws, dtype=np.float64).reshape(len(raws), expected_c)
                    if raws
                    else None
                ),
            )
            for boxes, scores, raws in raw_frames
        ]
        videos.append(VideoDetections(video_id, expected_c, frames).validate())
    return videos


def save_detections(videos: Sequence[VideoDetections], path) -> None:
    def lines():
        for video in videos:
            video.validate()
            frames = []
            for t, fr in enumerate(video.frames, 1):
                dets = []
                for i in range(len(fr)):
                    det = {
                        "box": [float(v) for v in fr.boxes[i]],
                        "scores": [float(v) for v in fr.scores[i]],
                    }
                    if fr.raw_scores is not None:
                        det["raw_scores"] = [float(v) for v in fr.raw_scores[i]]
                    dets.append(det)
                frames.append({"frame_index": t, "detections": dets})
            yield json.dumps(
                {
                    "video_id": video.video_id,
                    "num_frames": video.num_frames,
                    "frames": frames,
                },
                separators=(",", ":"),
            )

    _atomic_write(path, lines())


def load_paths(path) -> list[ActionPath]:
    paths: list[ActionPath] = []
    for lineno, rec in _records(path):
        video_id = _get(rec, "video_id", str, lineno)
        class_id = _get(rec, "class_id", int, lineno)
        num_frames = _get(rec, "num_frames", int, lineno)
        boxes_field = _get(rec, "boxes", list, lineno)
        boxes = [_parse_box(b, lineno) for b in boxes_field]
        scores = _float_list(_get(rec, "scores", list, lineno), "scores", lineno)
        raw = _float_list(_get(rec, "raw_scores", list, lineno), "raw_scores", lineno)
        energy = float(_get(rec, "energy", (int, float), lineno))
        if not (len(boxes) == len(scores) == len(raw) == num_frames) or num_frames < 1:
            raise MalformedRecord(
                "boxes, scores and raw_scores must all have num_frames entries",
                line=lineno,
            )
        if class_id < 0:
            raise MalformedRecord("negative class id", line=lineno)
        paths.append(
            ActionPath(
                video_id=video_id,
                class_id=class_id,
                boxes=np.asarray(boxes, dtype=np.float64),
                scores=np.asarray(scores, dtype=np.float64),
                raw_scores=np.asarray(raw, dtype=np.float64),
                energy=energy,
            )
        )
    return paths


def save_paths(paths: Sequence[ActionPath], path) -> None:
    def lines():
        for p in paths:
            validate_boxes(p.boxes, context=f"path in video {p.video_id!r}")
            yield json.dumps(
                {
                    "video_id": p.video_id,
                    "class_id": int(p.class_id),
                    "num_frames": p.num_frames,
                    "boxes": [[float(v) for v in b] for b in p.boxes],
                    "scores": [float(v) for v in p.scores],
                    "raw_scores": [float(v) for v in p.raw_scores],
                    "energy": float(p.energy),
                },
                separators=(",", ":"),
            )

    _atomic_write(path, lines())


def _load_tube_records(path, with_score: bool):
    for lineno, rec in _records(path):
        video_id = _get(rec, "video_id", str, lineno)
        class_id = _get(rec, "class_id", int, lineno)
        start = _get(rec, "start_frame", int, lineno)
        end = _get(rec, "end_frame", int, lineno)
        boxes = [_parse_box(b, lineno) for b in _get(rec, "boxes", list, lineno)]
        if start < 1 or end < start:
            raise MalformedRecord(f"invalid frame range [{start}, {end}]", line=lineno)
        if len(boxes) != end - start + 1:
            raise MalformedRecord(
                f"{len(boxes)} boxes for range [{start}, {end}]", line=lineno
            )
        if class_id < 0:
            raise MalformedRecord("negative class id", line=lineno)
        score = None
        if with_score:
            score = float(_get(rec, "score", (int, float), lineno))
            if not math.isfinite(score):
                raise MalformedRecord("non-finite score", line=lineno)
        yield video_id, class_id, start - 1, end - 1, np.asarray(boxes), score


def load_tubes(path) -> list[ActionTube]:
    return [
        ActionTube(v, c, s, e, boxes, score)
        for v, c, s, e, boxes, score in _load_tube_records(path, with_score=True)
    ]


def save_tubes(tubes: Sequence[ActionTube], path) -> None:
    def lines():
        for tube in tubes:
            tube.validate()
            yield json.dumps(
                {
                    "video_id": tube.video_id,
                    "class_id": int(tube.class_id),
                    "start_frame": tube.start + 1,
                    "end_frame": tube.end + 1,
                    "boxes": [[float(v) for v in b] for b in tube.boxes],
                    "score": float(tube.score),
                },
                separators=(",", ":"),
            )

    _atomic_write(path, lines())


def load_ground_truth(path) -> list[GroundTruthTube]:
    return [
        GroundTruthTube(v, c, s, e, boxes)
        for v, c, s, e, boxes, _ in _load_tube_records(path, with_score=False)
    ]


def save_ground_truth(tubes: Sequence[GroundTruthTube], path) -> None:
    def lines():
        for tube in tubes:
            tube.validate()
            yield json.dumps(
                {
                    "video_id": tube.video_id,
                    "class_id": int(tube.class_id),
                    "start_frame": tube.start + 1,
                    "end_frame": tube.end + 1,
                    "boxes": [[float(v) for v in b] for b in tube.boxes],
                },
                separators=(",", ":"),
            )

    _atomic_write(path, lines())


def load_catalog(path) -> ClassCatalog:
    with open(path, "r", encoding="utf-8") as f:
        try:
            rec = json.load(f)
        except json.JSONDecodeError as e:
            raise MalformedRecord(f"invalid JSON: {e.msg}") from None
    if not isinstance(rec, dict) or not isinstance(rec.get("classes"), list):
        raise MalformedRecord("catalog must be an object with a 'classes' list")
    try:
        return ClassCatalog(tuple(rec["classes"]))
    except ValueError as e:
        raise MalformedRecord(str(e)) from None
