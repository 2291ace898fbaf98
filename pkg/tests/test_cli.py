import json
import pathlib

import pytest
import yaml

from tubelink import data
from tubelink.cli import main


def scenario_mapping(seed=7, video_id="v0", class_id=0):
    return {
        "seed": seed,
        "num_frames": 12,
        "num_classes": 2,
        "video_id": video_id,
        "frame_size": [320, 240],
        "plants": [
            {
                "class_id": class_id,
                "start": 2,
                "end": 9,
                "start_box": [20, 20, 60, 80],
                "end_box": [40, 30, 80, 90],
                "peak_score": 0.9,
                "ramp": 1,
            }
        ],
        "clutter_per_frame": 2,
        "box_jitter": 1.0,
        "score_noise": 0.02,
    }


@pytest.fixture
def corpus_files(tmp_path):
    spec_file = tmp_path / "spec.yaml"
    spec_file.write_text(
        yaml.safe_dump(
            {"scenarios": [scenario_mapping(7, "v0", 0), scenario_mapping(8, "v1", 1)]}
        )
    )
    prefix = str(tmp_path / "corpus")
    assert main(["synth", "--spec", str(spec_file), "--out-prefix", prefix]) == 0
    return {
        "appearance": f"{prefix}.appearance.jsonl",
        "motion": f"{prefix}.motion.jsonl",
        "gt": f"{prefix}.gt.jsonl",
        "dir": tmp_path,
    }


def test_schema_flag(capsys):
    assert main(["--schema"]) == 0
    out = capsys.readouterr().out
    assert "video_id" in out and "start_frame" in out


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1


def test_unknown_flag_is_usage_error_and_writes_nothing(tmp_path, capsys):
    out = tmp_path / "x.jsonl"
    code = main(["fuse", "--bogus", "1", "--out", str(out)])
    assert code == 1
    assert not out.exists()


def test_missing_input_file_is_io_error(tmp_path):
    code = main(
        ["fuse", "--appearance", str(tmp_path / "absent.jsonl"),
         "--motion", str(tmp_path / "absent2.jsonl"),
         "--out", str(tmp_path / "o.jsonl")]
    )
    assert code == 3


def test_malformed_data_is_data_error(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{oops\n")
    code = main(
        ["fuse", "--appearance", str(bad), "--motion", str(bad),
         "--out", str(tmp_path / "o.jsonl")]
    )
    assert code == 2


def test_synth_outputs_load(corpus_files):
    videos = data.load_detections(corpus_files["appearance"])
    assert [v.video_id for v in videos] == ["v0", "v1"]
    gts = data.load_ground_truth(corpus_files["gt"])
    assert len(gts) == 2


def test_fuse_link_trim_chain(corpus_files, tmp_path):
    fused = str(tmp_path / "fused.jsonl")
    paths = str(tmp_path / "paths.jsonl")
    tubes = str(tmp_path / "tubes.jsonl")
    assert main(["fuse", "--appearance", corpus_files["appearance"],
                 "--motion", corpus_files["motion"], "--tau", "0.3",
                 "--out", fused]) == 0
    fused_videos = data.load_detections(fused)
    assert all(f.raw_scores is not None for v in fused_videos for f in v.frames if len(f))
    assert main(["link", "--in", fused, "--lambda-o", "1.0", "--max-paths", "3",
                 "--out", paths]) == 0
    loaded_paths = data.load_paths(paths)
    assert loaded_paths and all(p.num_frames == 12 for p in loaded_paths)
    assert main(["trim", "--in", paths, "--lambda-l", "1.0", "--top-k", "40",
                 "--out", tubes]) == 0
    loaded_tubes = data.load_tubes(tubes)
    assert loaded_tubes


def test_chain_matches_pipeline(corpus_files, tmp_path):
    fused = str(tmp_path / "fused.jsonl")
    paths = str(tmp_path / "paths.jsonl")
    tubes_chain = str(tmp_path / "tubes_chain.jsonl")
    tubes_pipe = str(tmp_path / "tubes_pipe.jsonl")
    assert main(["fuse", "--appearance", corpus_files["appearance"],
                 "--motion", corpus_files["motion"], "--out", fused]) == 0
    assert main(["link", "--in", fused, "--out", paths]) == 0
    assert main(["trim", "--in", paths, "--out", tubes_chain]) == 0
    assert main(["pipeline", "--appearance", corpus_files["appearance"],
                 "--motion", corpus_files["motion"], "--out", tubes_pipe]) == 0
    with open(tubes_chain, "rb") as a, open(tubes_pipe, "rb") as b:
        assert a.read() == b.read()


def test_pipeline_worker_counts_byte_identical(corpus_files, tmp_path):
    outputs = []
    for workers in (1, 2):
        out = tmp_path / f"tubes_w{workers}.jsonl"
        assert main(["pipeline", "--appearance", corpus_files["appearance"],
                     "--motion", corpus_files["motion"], "--out", str(out),
                     "--workers", str(workers)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_pipeline_config_file_and_flag_override(corpus_files, tmp_path):
    config = {
        "schema_version": 1,
        "io": {
            "appearance": corpus_files["appearance"],
            "motion": corpus_files["motion"],
            "out": str(tmp_path / "from_config.jsonl"),
        },
        "fusion": {"tau": 0.3},
        "pathing": {"max_paths_per_class": 2},
        "trimming": {"lambda_l": 1.0, "top_k": 10},
        "workers": 1,
    }
    cfg_file = tmp_path / "cfg.yaml"
    cfg_file.write_text(yaml.safe_dump(config))
    assert main(["pipeline", "--config", str(cfg_file)]) == 0
    assert (tmp_path / "from_config.jsonl").exists()

    override = tmp_path / "override.jsonl"
    assert main(["pipeline", "--config", str(cfg_file), "--out", str(override)]) == 0
    assert override.exists()


def test_pipeline_bad_schema_version(tmp_path, corpus_files):
    cfg_file = tmp_path / "cfg.yaml"
    cfg_file.write_text(yaml.safe_dump({"schema_version": 99}))
    code = main(["pipeline", "--config", str(cfg_file),
                 "--appearance", corpus_files["appearance"],
                 "--motion", corpus_files["motion"],
                 "--out", str(tmp_path / "o.jsonl")])
    assert code == 2


def test_eval_exact_match_reports_map_one(corpus_files, tmp_path, capsys):
    # predictions identical to ground truth
    gts = data.load_ground_truth(corpus_files["gt"])
    tubes = [
        data.ActionTube(g.video_id, g.class_id, g.start, g.end, g.boxes, score=0.9)
        for g in gts
    ]
    tubes_file = tmp_path / "pred.jsonl"
    data.save_tubes(tubes, tubes_file)
    report_prefix = str(tmp_path / "report")
    code = main(["eval", "--tubes", str(tubes_file), "--gt", corpus_files["gt"],
                 "--deltas", "0.2", "--report", report_prefix,
                 "--pr-dump", str(tmp_path / "pr.jsonl")])
    assert code == 0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["mean_ap"][repr(0.2)] == 1.0
    assert payload["accuracy"] == 1.0
    table = (tmp_path / "report.txt").read_text()
    assert "mAP" in table
    pr_lines = (tmp_path / "pr.jsonl").read_text().splitlines()
    assert pr_lines and all(json.loads(l)["points"] for l in pr_lines)


def test_eval_with_class_names(corpus_files, tmp_path):
    catalog_file = tmp_path / "classes.json"
    catalog_file.write_text(json.dumps({"classes": ["walk", "run"]}))
    gts = data.load_ground_truth(corpus_files["gt"])
    tubes_file = tmp_path / "pred.jsonl"
    data.save_tubes(
        [data.ActionTube(g.video_id, g.class_id, g.start, g.end, g.boxes, 0.5)
         for g in gts],
        tubes_file,
    )
    report_prefix = str(tmp_path / "report")
    assert main(["eval", "--tubes", str(tubes_file), "--gt", corpus_files["gt"],
                 "--deltas", "0.1,0.5", "--classes", str(catalog_file),
                 "--report", report_prefix]) == 0
    assert "walk" in (tmp_path / "report.txt").read_text()


def test_trim_alpha_by_name_requires_catalog(corpus_files, tmp_path):
    fused = str(tmp_path / "fused.jsonl")
    paths = str(tmp_path / "paths.jsonl")
    assert main(["fuse", "--appearance", corpus_files["appearance"],
                 "--motion", corpus_files["motion"], "--out", fused]) == 0
    assert main(["link", "--in", fused, "--out", paths]) == 0
    code = main(["trim", "--in", paths, "--alpha", "walk=2.0",
                 "--out", str(tmp_path / "t.jsonl")])
    assert code == 2

    catalog_file = tmp_path / "classes.json"
    catalog_file.write_text(json.dumps({"classes": ["walk", "run"]}))
    assert main(["trim", "--in", paths, "--alpha", "walk=2.0",
                 "--classes", str(catalog_file),
                 "--out", str(tmp_path / "t.jsonl")]) == 0


def test_synth_reproduces_golden_corpus_bytes(tmp_path):
    # pins the cross-release stability promise of the scenario generator
    golden_dir = pathlib.Path(__file__).parent / "data" / "golden"
    prefix = str(tmp_path / "regen")
    assert main(["synth", "--spec", str(golden_dir / "spec.yaml"),
                 "--out-prefix", prefix]) == 0
    for kind in ("appearance", "motion", "gt"):
        regen = pathlib.Path(f"{prefix}.{kind}.jsonl").read_bytes()
        golden = (golden_dir / f"golden.{kind}.jsonl").read_bytes()
        assert regen == golden, f"{kind} stream diverged from golden corpus"


def test_trim_background_and_foreground_mode_flags(corpus_files, tmp_path):
    fused = str(tmp_path / "fused.jsonl")
    paths = str(tmp_path / "paths.jsonl")
    assert main(["fuse", "--appearance", corpus_files["appearance"],
                 "--motion", corpus_files["motion"], "--out", fused]) == 0
    assert main(["link", "--in", fused, "--out", paths]) == 0
    out = tmp_path / "tubes_const.jsonl"
    assert main(["trim", "--in", paths, "--background-mode", "constant",
                 "--background-constant", "0.95", "--foreground-scores", "raw",
                 "--out", str(out)]) == 0
    # raw foreground (<= 1) never beats a 0.95 constant background by much:
    # the permissive complement default must yield at least as many tubes
    default_out = tmp_path / "tubes_default.jsonl"
    assert main(["trim", "--in", paths, "--out", str(default_out)]) == 0
    assert len(out.read_text().splitlines()) <= len(
        default_out.read_text().splitlines()
    )
    assert main(["trim", "--in", paths, "--background-mode", "wat",
                 "--out", str(tmp_path / "x.jsonl")]) == 2

    # explicitly passed values must take effect: top-k 1 scores tubes by
    # their single best frame, so multi-frame tube scores rise
    topk_out = tmp_path / "tubes_topk1.jsonl"
    assert main(["trim", "--in", paths, "--top-k", "1",
                 "--out", str(topk_out)]) == 0
    default_tubes = {
        (t.video_id, t.class_id, t.start, t.end): t.score
        for t in data.load_tubes(default_out)
    }
    for t in data.load_tubes(topk_out):
        key = (t.video_id, t.class_id, t.start, t.end)
        if key in default_tubes and t.end > t.start:
            assert t.score >= default_tubes[key]


def test_synth_duplicate_video_ids_rejected(tmp_path):
    spec_file = tmp_path / "spec.yaml"
    spec_file.write_text(
        yaml.safe_dump({"scenarios": [scenario_mapping(1, "same"),
                                      scenario_mapping(2, "same")]})
    )
    assert main(["synth", "--spec", str(spec_file),
                 "--out-prefix", str(tmp_path / "c")]) == 2


def test_synth_unknown_key_rejected(tmp_path):
    bad = scenario_mapping()
    bad["wat"] = 1
    spec_file = tmp_path / "spec.yaml"
    spec_file.write_text(yaml.safe_dump(bad))
    assert main(["synth", "--spec", str(spec_file),
                 "--out-prefix", str(tmp_path / "c")]) == 2
