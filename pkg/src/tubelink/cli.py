"""Command-line front door: fuse, link, trim, pipeline, eval, synth.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 I/O failure.
Diagnostics go to stderr only; every output file is written atomically.
Each parameter flag has a config-file equivalent (YAML tree with a
``schema_version`` field); explicitly passed flags override file values.
"""

from __future__ import annotations

import json
import sys

import click
import yaml
from click.core import ParameterSource

from . import data, synth
from .data import DataError, SCHEMA_TEXT
from .evaluation import EvalConfig, evaluate, pr_points
from .fusion import FusionConfig, fuse_video
from .pathing import PathConfig, adjacent_iou_matrices, extract_paths
from .pipeline import PipelineConfig, default_workers, pair_streams, run_pipeline
from .trimming import TrimConfig, trim_paths

CONFIG_SCHEMA_VERSION = 1


def _log(message: str) -> None:
    click.echo(message, err=True)


def _load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        try:
            cfg = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise DataError(f"config file {path}: invalid YAML: {e}") from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise DataError(f"config file {path}: top level must be a mapping")
    version = cfg.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise DataError(
            f"config file {path}: unsupported schema_version {version!r} "
            f"(expected {CONFIG_SCHEMA_VERSION})"
        )
    return cfg


def _merger(ctx: click.Context, config: dict):
    """Resolve a parameter: explicit flag wins, then config file, then default."""

    def get(param: str, section: str, key: str):
        if config and ctx.get_parameter_source(param) == ParameterSource.DEFAULT:
            sec = config.get(section)
            if isinstance(sec, dict) and key in sec:
                return sec[key]
        return ctx.params[param]

    return get


def _catalog_or_none(path):
    return data.load_catalog(path) if path else None


def _parse_alpha_overrides(pairs, catalog) -> dict[int, float]:
    overrides: dict[int, float] = {}
    for item in pairs:
        if isinstance(item, dict):  # config-file form: mapping
            entries = item.items()
        else:
            if "=" not in item:
                raise DataError(f"bad --alpha entry {item!r}, expected CLASS=VALUE")
            key, value = item.split("=", 1)
            entries = [(key, value)]
        for key, value in entries:
            try:
                class_id = int(key)
            except (TypeError, ValueError):
                if catalog is None:
                    raise DataError(
                        f"--alpha {key!r}: class names need --classes CATALOG"
                    ) from None
                try:
                    class_id = catalog.id_of(str(key))
                except KeyError as e:
                    raise DataError(str(e)) from None
            try:
                overrides[class_id] = float(value)
            except (TypeError, ValueError):
                raise DataError(f"bad --alpha value for {key!r}: {value!r}") from None
    return overrides


def _parse_deltas(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):  # config-file form
        values = text
    else:
        values = [part for part in str(text).split(",") if part.strip()]
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise DataError(f"bad deltas {text!r}") from None


def _trim_config(get, catalog_path) -> TrimConfig:
    catalog = _catalog_or_none(catalog_path)
    raw_alpha = get("alpha", "trimming", "alpha")
    alpha_entries = [raw_alpha] if isinstance(raw_alpha, dict) else list(raw_alpha)
    overrides = _parse_alpha_overrides(alpha_entries, catalog)
    alpha_default = float(get("alpha_default", "trimming", "alpha_default"))
    alpha = overrides if overrides else alpha_default
    return TrimConfig(
        lambda_l=float(get("lambda_l", "trimming", "lambda_l")),
        alpha=alpha,
        alpha_default=alpha_default,
        background_score_mode=str(
            get("background_mode", "trimming", "background_score_mode")
        ),
        background_constant=float(
            get("background_constant", "trimming", "background_constant")
        ),
        foreground_score_mode=str(
            get("foreground_scores", "trimming", "foreground_score_mode")
        ),
        top_k=int(get("top_k", "trimming", "top_k")),
    )


@click.group(invoke_without_command=True)
@click.option(
    "--schema",
    "show_schema",
    is_flag=True,
    help="Print the authoritative interchange file schema and exit.",
)
@click.pass_context
def cli(ctx: click.Context, show_schema: bool):
    """Turn two-stream detections into scored action tubes and evaluate them."""
    if show_schema:
        click.echo(SCHEMA_TEXT, nl=False)
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(cli.get_help(ctx))
        ctx.exit(1)


@cli.command()
@click.option("--appearance", "appearance_path", default=None, help="Appearance detections file.")
@click.option("--motion", "motion_path", default=None, help="Motion detections file.")
@click.option("--tau", type=float, default=0.3, show_default=True, help="Minimum IoU (strict) for boosting.")
@click.option("--out", "out_path", default=None, help="Output fused detections file.")
@click.option("--config", "config_path", default=None, help="Config file (flags override).")
@click.pass_context
def fuse(ctx, appearance_path, motion_path, tau, out_path, config_path):
    """Boost appearance scores with overlapping motion detections."""
    config = _load_config(config_path) if config_path else {}
    get = _merger(ctx, config)
    appearance_path = get("appearance_path", "io", "appearance")
    motion_path = get("motion_path", "io", "motion")
    out_path = get("out_path", "io", "out")
    _require(appearance_path, "--appearance")
    _require(motion_path, "--motion")
    _require(out_path, "--out")
    cfg = FusionConfig(tau=float(get("tau", "fusion", "tau")))
    appearance = data.load_detections(appearance_path)
    motion = data.load_detections(motion_path, num_classes=appearance[0].num_classes if appearance else None)
    pairs = sorted(pair_streams(appearance, motion), key=lambda p: p[0].video_id)
    fused = [fuse_video(a, m, cfg) for a, m in pairs]
    data.save_detections(fused, out_path)
    _log(f"fused {len(fused)} videos -> {out_path}")


def _require(value, flag: str) -> None:
    if not value:
        raise click.UsageError(f"missing required option {flag}")


@cli.command()
@click.option("--in", "in_path", default=None, help="Fused detections file.")
@click.option("--lambda-o", "lambda_o", type=float, default=1.0, show_default=True, help="Pairwise overlap weight.")
@click.option("--max-paths", type=int, default=10, show_default=True, help="Paths extracted per class.")
@click.option("--score-floor", type=float, default=0.0, show_default=True, help="Drop boxes below this class score (0 disables).")
@click.option("--out", "out_path", default=None, help="Output paths file.")
@click.option("--config", "config_path", default=None, help="Config file (flags override).")
@click.pass_context
def link(ctx, in_path, lambda_o, max_paths, score_floor, out_path, config_path):
    """Link detections into class-specific action paths (first DP pass)."""
    config = _load_config(config_path) if config_path else {}
    get = _merger(ctx, config)
    in_path = get("in_path", "io", "in")
    out_path = get("out_path", "io", "out")
    _require(in_path, "--in")
    _require(out_path, "--out")
    cfg = PathConfig(
        lambda_o=float(get("lambda_o", "pathing", "lambda_o")),
        max_paths_per_class=int(get("max_paths", "pathing", "max_paths_per_class")),
        score_floor=float(get("score_floor", "pathing", "score_floor")),
    )
    videos = sorted(data.load_detections(in_path), key=lambda v: v.video_id)
    paths = []
    for video in videos:
        iou_mats = adjacent_iou_matrices(video)
        for class_id in range(video.num_classes):
            paths.extend(extract_paths(video, class_id, cfg, iou_mats=iou_mats))
    data.save_paths(paths, out_path)
    _log(f"linked {len(paths)} paths from {len(videos)} videos -> {out_path}")


@cli.command()
@click.option("--in", "in_path", default=None, help="Paths file.")
@click.option("--lambda-l", "lambda_l", type=float, default=1.0, show_default=True, help="Label-smoothness weight.")
@click.option("--alpha-default", "alpha_default", type=float, default=1.0, show_default=True, help="Label-switch penalty for classes without override.")
@click.option("--alpha", multiple=True, help="Per-class override CLASS=VALUE (id, or name with --classes). Repeatable.")
@click.option("--top-k", "top_k", type=int, default=40, show_default=True, help="Scores averaged for the tube score.")
@click.option("--background-mode", default="complement", show_default=True, help="Background unary: complement or constant.")
@click.option("--background-constant", type=float, default=0.5, show_default=True, help="Background unary value in constant mode.")
@click.option("--foreground-scores", default="augmented", show_default=True, help="Foreground unary: augmented or raw.")
@click.option("--classes", "classes_path", default=None, help="Class catalog JSON (for --alpha by name).")
@click.option("--out", "out_path", default=None, help="Output tubes file.")
@click.option("--config", "config_path", default=None, help="Config file (flags override).")
@click.pass_context
def trim(ctx, in_path, lambda_l, alpha_default, alpha, top_k, background_mode,
         background_constant, foreground_scores, classes_path, out_path, config_path):
    """Label and temporally trim paths into tubes (second DP pass)."""
    config = _load_config(config_path) if config_path else {}
    get = _merger(ctx, config)
    in_path = get("in_path", "io", "in")
    out_path = get("out_path", "io", "out")
    classes_path = get("classes_path", "io", "classes")
    _require(in_path, "--in")
    _require(out_path, "--out")
    cfg = _trim_config(get, classes_path)
    paths = data.load_paths(in_path)
    paths.sort(key=lambda p: p.video_id)
    tubes = trim_paths(paths, cfg)
    data.save_tubes(tubes, out_path)
    _log(f"trimmed {len(paths)} paths into {len(tubes)} tubes -> {out_path}")


@cli.command()
@click.option("--appearance", "appearance_path", default=None, help="Appearance detections file.")
@click.option("--motion", "motion_path", default=None, help="Motion detections file.")
@click.option("--out", "out_path", default=None, help="Output tubes file.")
@click.option("--tau", type=float, default=0.3, show_default=True, help="Fusion IoU threshold.")
@click.option("--lambda-o", "lambda_o", type=float, default=1.0, show_default=True, help="Linking pairwise weight.")
@click.option("--max-paths", type=int, default=10, show_default=True, help="Paths extracted per class.")
@click.option("--score-floor", type=float, default=0.0, show_default=True, help="Candidate score floor (0 disables).")
@click.option("--lambda-l", "lambda_l", type=float, default=1.0, show_default=True, help="Trimming pairwise weight.")
@click.option("--alpha-default", "alpha_default", type=float, default=1.0, show_default=True, help="Default label-switch penalty.")
@click.option("--alpha", multiple=True, help="Per-class override CLASS=VALUE. Repeatable.")
@click.option("--top-k", "top_k", type=int, default=40, show_default=True, help="Scores averaged for the tube score.")
@click.option("--background-mode", default="complement", show_default=True)
@click.option("--background-constant", type=float, default=0.5, show_default=True)
@click.option("--foreground-scores", default="augmented", show_default=True)
@click.option("--classes", "classes_path", default=None, help="Class catalog JSON.")
@click.option("--workers", type=int, default=None, help="Worker processes (default: $TUBELINK_WORKERS or 1).")
@click.option("--config", "config_path", default=None, help="Config file (flags override).")
@click.pass_context
def pipeline(ctx, appearance_path, motion_path, out_path, tau, lambda_o, max_paths,
             score_floor, lambda_l, alpha_default, alpha, top_k, background_mode,
             background_constant, foreground_scores, classes_path, workers, config_path):
    """Run fuse, link, and trim end to end from one configuration."""
    config = _load_config(config_path) if config_path else {}
    get = _merger(ctx, config)
    appearance_path = get("appearance_path", "io", "appearance")
    motion_path = get("motion_path", "io", "motion")
    out_path = get("out_path", "io", "out")
    classes_path = get("classes_path", "io", "classes")
    _require(appearance_path, "--appearance")
    _require(motion_path, "--motion")
    _require(out_path, "--out")
    if workers is None:
        workers = config.get("workers", default_workers()) if config else default_workers()
    cfg = PipelineConfig(
        fusion=FusionConfig(tau=float(get("tau", "fusion", "tau"))),
        pathing=PathConfig(
            lambda_o=float(get("lambda_o", "pathing", "lambda_o")),
            max_paths_per_class=int(get("max_paths", "pathing", "max_paths_per_class")),
            score_floor=float(get("score_floor", "pathing", "score_floor")),
        ),
        trimming=_trim_config(get, classes_path),
    )
    appearance = data.load_detections(appearance_path)
    motion = data.load_detections(motion_path, num_classes=appearance[0].num_classes if appearance else None)
    _log(f"loaded {len(appearance)} videos per stream")
    tubes = run_pipeline(appearance, motion, cfg, workers=int(workers))
    data.save_tubes(tubes, out_path)
    _log(f"pipeline produced {len(tubes)} tubes -> {out_path}")


@cli.command("eval")
@click.option("--tubes", "tubes_path", default=None, help="Predicted tubes file.")
@click.option("--gt", "gt_path", default=None, help="Ground-truth tubes file.")
@click.option("--deltas", default="0.05,0.1,0.2,0.3,0.4,0.5,0.6", show_default=True, help="Comma-separated overlap thresholds.")
@click.option("--report", "report_prefix", default=None, help="Write REPORT.txt (table) and REPORT.json (machine-readable).")
@click.option("--pr-dump", "pr_dump_path", default=None, help="Write per-class precision-recall points (JSONL).")
@click.option("--classes", "classes_path", default=None, help="Class catalog JSON for readable names.")
@click.option("--config", "config_path", default=None, help="Config file (flags override).")
@click.pass_context
def eval_cmd(ctx, tubes_path, gt_path, deltas, report_prefix, pr_dump_path, classes_path, config_path):
    """Evaluate predicted tubes against ground truth."""
    config = _load_config(config_path) if config_path else {}
    get = _merger(ctx, config)
    tubes_path = get("tubes_path", "io", "tubes")
    gt_path = get("gt_path", "io", "gt")
    classes_path = get("classes_path", "io", "classes")
    _require(tubes_path, "--tubes")
    _require(gt_path, "--gt")
    try:
        cfg = EvalConfig(deltas=_parse_deltas(get("deltas", "eval", "deltas")))
    except ValueError as e:
        raise DataError(str(e)) from None
    catalog = _catalog_or_none(classes_path)
    tubes = data.load_tubes(tubes_path)
    ground_truth = data.load_ground_truth(gt_path)
    report = evaluate(tubes, ground_truth, cfg)
    table = report.format_table(catalog)
    click.echo(table)
    if report_prefix:
        data._atomic_write(f"{report_prefix}.txt", [table])
        data._atomic_write(
            f"{report_prefix}.json", [json.dumps(report.to_json_dict(), separators=(",", ":"))]
        )
        _log(f"report written to {report_prefix}.txt and {report_prefix}.json")
    if pr_dump_path:
        preds_by_class: dict[int, list] = {}
        gts_by_class: dict[int, list] = {}
        for t in tubes:
            preds_by_class.setdefault(t.class_id, []).append(t)
        for g in ground_truth:
            gts_by_class.setdefault(g.class_id, []).append(g)
        lines = []
        for class_id in report.class_ids:
            for delta in cfg.deltas:
                points = pr_points(
                    preds_by_class.get(class_id, []),
                    gts_by_class.get(class_id, []),
                    delta,
                )
                lines.append(
                    json.dumps(
                        {"class_id": class_id, "delta": delta, "points": points},
                        separators=(",", ":"),
                    )
                )
        data._atomic_write(pr_dump_path, lines)
        _log(f"precision-recall points written to {pr_dump_path}")


def _plant_from_mapping(rec: dict) -> synth.PlantSpec:
    try:
        return synth.PlantSpec(
            class_id=int(rec["class_id"]),
            start=int(rec["start"]),
            end=int(rec["end"]),
            start_box=tuple(float(v) for v in rec["start_box"]),
            end_box=tuple(float(v) for v in rec["end_box"]),
            peak_score=float(rec.get("peak_score", 0.9)),
            ramp=int(rec.get("ramp", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"bad plant spec {rec!r}: {e}") from None


_SCENARIO_KEYS = {
    "seed", "num_frames", "num_classes", "frame_size", "plants",
    "clutter_per_frame", "clutter_score_range", "box_jitter", "score_noise",
    "video_id",
}


def _scenario_from_mapping(rec: dict) -> synth.ScenarioSpec:
    unknown = set(rec) - _SCENARIO_KEYS
    if unknown:
        raise DataError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        return synth.ScenarioSpec(
            seed=int(rec["seed"]),
            num_frames=int(rec["num_frames"]),
            num_classes=int(rec["num_classes"]),
            frame_size=tuple(float(v) for v in rec.get("frame_size", (320.0, 240.0))),
            plants=tuple(_plant_from_mapping(p) for p in rec.get("plants", [])),
            clutter_per_frame=int(rec.get("clutter_per_frame", 0)),
            clutter_score_range=tuple(
                float(v) for v in rec.get("clutter_score_range", (0.01, 0.15))
            ),
            box_jitter=float(rec.get("box_jitter", 0.0)),
            score_noise=float(rec.get("score_noise", 0.0)),
            video_id=str(rec.get("video_id", "")),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"bad scenario spec: {e}") from None


@cli.command("synth")
@click.option("--spec", "spec_path", required=True, help="Scenario spec file (YAML/JSON).")
@click.option("--out-prefix", "out_prefix", required=True, help="Prefix for .appearance/.motion/.gt .jsonl outputs.")
def synth_cmd(spec_path, out_prefix):
    """Generate a synthetic corpus in the interchange format."""
    with open(spec_path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise DataError(f"spec file {spec_path}: invalid YAML: {e}") from None
    if isinstance(raw, dict) and "scenarios" in raw:
        scenario_recs = raw["scenarios"]
    elif isinstance(raw, dict):
        scenario_recs = [raw]
    else:
        raise DataError("spec file must hold a scenario mapping or {scenarios: [...]}")
    if not isinstance(scenario_recs, list) or not scenario_recs:
        raise DataError("scenarios must be a non-empty list")
    appearance, motion, ground_truth = [], [], []
    for rec in scenario_recs:
        if not isinstance(rec, dict):
            raise DataError(f"scenario entry is not a mapping: {rec!r}")
        try:
            app, mot, gts = synth.generate(_scenario_from_mapping(rec))
        except synth.ScenarioError as e:
            raise DataError(str(e)) from None
        appearance.append(app)
        motion.append(mot)
        ground_truth.extend(gts)
    ids = [v.video_id for v in appearance]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate video ids in spec: {ids}")
    data.save_detections(appearance, f"{out_prefix}.appearance.jsonl")
    data.save_detections(motion, f"{out_prefix}.motion.jsonl")
    data.save_ground_truth(ground_truth, f"{out_prefix}.gt.jsonl")
    _log(
        f"wrote {len(appearance)} videos to {out_prefix}.appearance.jsonl, "
        f"{out_prefix}.motion.jsonl, {out_prefix}.gt.jsonl"
    )


def main(argv=None) -> int:
    """Run the CLI; returns the process exit status."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        hint = e.ctx.get_usage() if e.ctx is not None else None
        if hint:
            click.echo(hint, err=True)
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except click.ClickException as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except ValueError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except OSError as e:
        click.echo(f"i/o error: {e}", err=True)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
