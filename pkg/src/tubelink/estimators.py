"""Scikit-learn style wrappers so the stages compose with the ML ecosystem.

Every stage is a stateless transformer (``fit`` validates and returns self;
there are no learned parameters), so they chain in an
``sklearn.pipeline.Pipeline`` and cooperate with ``get_params``/``set_params``
driven tooling:

    Pipeline([
        ("fuse", ScoreFusion(tau=0.3)),
        ("link", PathLinker(lambda_o=1.0)),
        ("trim", TubeTrimmer(lambda_l=1.0)),
    ]).transform(pairs)

``X`` is a sequence of per-video items: (appearance, motion) pairs for
``ScoreFusion`` and ``ActionTubeDetector``, fused ``VideoDetections`` for
``PathLinker``, and per-video path lists for ``TubeTrimmer``.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin

from .data import ActionPath, GroundTruthTube, VideoDetections
from .evaluation import EvalConfig, evaluate
from .fusion import FusionConfig, fuse_video
from .pathing import PathConfig, adjacent_iou_matrices, extract_paths
from .pipeline import PipelineConfig, fuse_link_trim
from .trimming import TrimConfig, trim_paths


def check_videos(X) -> list[VideoDetections]:
    """Validate a sequence of VideoDetections."""
    videos = list(X)
    for v in videos:
        if not isinstance(v, VideoDetections):
            raise TypeError(f"expected VideoDetections, got {type(v).__name__}")
        v.validate()
    return videos


def check_detection_pairs(X) -> list[tuple[VideoDetections, VideoDetections]]:
    """Validate a sequence of (appearance, motion) VideoDetections pairs."""
    pairs = []
    for item in X:
        try:
            appearance, motion = item
        except (TypeError, ValueError):
            raise TypeError(
                "expected items of the form (appearance, motion)"
            ) from None
        check_videos([appearance, motion])
        pairs.append((appearance, motion))
    return pairs


def check_path_lists(X) -> list[list[ActionPath]]:
    """Validate a sequence of per-video ActionPath lists."""
    groups = []
    for item in X:
        group = list(item)
        for p in group:
            if not isinstance(p, ActionPath):
                raise TypeError(f"expected ActionPath, got {type(p).__name__}")
        groups.append(group)
    return groups


class _StatelessMixin:
    """These estimators learn nothing; they are always ready to transform."""

    def __sklearn_is_fitted__(self) -> bool:
        return True


class ScoreFusion(_StatelessMixin, BaseEstimator, TransformerMixin):
    """Boost appearance scores with overlapping motion detections.

    Parameters
    ----------
    tau : float, default 0.3
        Minimum IoU (strict) between an appearance box and its best
        overlapping motion box for the boost to apply.
    """

    def __init__(self, tau: float = 0.3):
        self.tau = tau

    def fit(self, X, y=None):
        check_detection_pairs(X)
        self._config()
        return self

    def transform(self, X) -> list[VideoDetections]:
        cfg = self._config()
        return [fuse_video(a, m, cfg) for a, m in check_detection_pairs(X)]

    def _config(self) -> FusionConfig:
        return FusionConfig(tau=self.tau)


class PathLinker(_StatelessMixin, BaseEstimator, TransformerMixin):
    """Link fused detections into class-specific full-video paths."""

    def __init__(
        self,
        lambda_o: float = 1.0,
        max_paths_per_class: int = 10,
        score_floor: float = 0.0,
    ):
        self.lambda_o = lambda_o
        self.max_paths_per_class = max_paths_per_class
        self.score_floor = score_floor

    def fit(self, X, y=None):
        check_videos(X)
        self._config()
        return self

    def transform(self, X) -> list[list[ActionPath]]:
        cfg = self._config()
        out = []
        for video in check_videos(X):
            iou_mats = adjacent_iou_matrices(video)
            paths: list[ActionPath] = []
            for class_id in range(video.num_classes):
                paths.extend(extract_paths(video, class_id, cfg, iou_mats=iou_mats))
            out.append(paths)
        return out

    def _config(self) -> PathConfig:
        return PathConfig(
            lambda_o=self.lambda_o,
            max_paths_per_class=self.max_paths_per_class,
            score_floor=self.score_floor,
        )


class TubeTrimmer(_StatelessMixin, BaseEstimator, TransformerMixin):
    """Label path boxes foreground/background and cut tubes."""

    def __init__(
        self,
        lambda_l: float = 1.0,
        alpha=1.0,
        alpha_default: float = 1.0,
        background_score_mode: str = "complement",
        background_constant: float = 0.5,
        foreground_score_mode: str = "augmented",
        top_k: int = 40,
    ):
        self.lambda_l = lambda_l
        self.alpha = alpha
        self.alpha_default = alpha_default
        self.background_score_mode = background_score_mode
        self.background_constant = background_constant
        self.foreground_score_mode = foreground_score_mode
        self.top_k = top_k

    def fit(self, X, y=None):
        check_path_lists(X)
        self._config()
        return self

    def transform(self, X):
        cfg = self._config()
        return [trim_paths(group, cfg) for group in check_path_lists(X)]

    def _config(self) -> TrimConfig:
        return TrimConfig(
            lambda_l=self.lambda_l,
            alpha=self.alpha,
            alpha_default=self.alpha_default,
            background_score_mode=self.background_score_mode,
            background_constant=self.background_constant,
            foreground_score_mode=self.foreground_score_mode,
            top_k=self.top_k,
        )


class ActionTubeDetector(_StatelessMixin, BaseEstimator):
    """Whole pipeline as one predictor: detection pairs in, tubes out.

    ``predict`` returns one list of ActionTubes per input video pair.
    ``score`` evaluates mAP against ground-truth tubes at ``delta``.
    """

    def __init__(
        self,
        tau: float = 0.3,
        lambda_o: float = 1.0,
        max_paths_per_class: int = 10,
        score_floor: float = 0.0,
        lambda_l: float = 1.0,
        alpha=1.0,
        alpha_default: float = 1.0,
        background_score_mode: str = "complement",
        background_constant: float = 0.5,
        foreground_score_mode: str = "augmented",
        top_k: int = 40,
        trim: bool = True,
    ):
        self.tau = tau
        self.lambda_o = lambda_o
        self.max_paths_per_class = max_paths_per_class
        self.score_floor = score_floor
        self.lambda_l = lambda_l
        self.alpha = alpha
        self.alpha_default = alpha_default
        self.background_score_mode = background_score_mode
        self.background_constant = background_constant
        self.foreground_score_mode = foreground_score_mode
        self.top_k = top_k
        self.trim = trim

    def fit(self, X, y=None):
        check_detection_pairs(X)
        self._config()
        return self

    def predict(self, X):
        cfg = self._config()
        return [fuse_link_trim(a, m, cfg) for a, m in check_detection_pairs(X)]

    def score(self, X, y, delta: float = 0.5) -> float:
        """mAP at ``delta``; ``y`` is one GroundTruthTube list per video."""
        groups = list(y)
        tubes = [t for group in self.predict(X) for t in group]
        gts: list[GroundTruthTube] = [g for group in groups for g in group]
        report = evaluate(tubes, gts, EvalConfig(deltas=(delta,)))
        value = report.mean_ap[report.deltas[0]]
        if value is None:
            raise ValueError("mAP undefined: no ground truth provided")
        return value

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            fusion=FusionConfig(tau=self.tau),
            pathing=PathConfig(
                lambda_o=self.lambda_o,
                max_paths_per_class=self.max_paths_per_class,
                score_floor=self.score_floor,
            ),
            trimming=TrimConfig(
                lambda_l=self.lambda_l,
                alpha=self.alpha,
                alpha_default=self.alpha_default,
                background_score_mode=self.background_score_mode,
                background_constant=self.background_constant,
                foreground_score_mode=self.foreground_score_mode,
                top_k=self.top_k,
            ),
            trim=self.trim,
        )
