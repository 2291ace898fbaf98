import json
import random

import numpy as np
import pytest

from tubelink.data import (
    ActionPath,
    ActionTube,
    BadFrameIndex,
    ClassCatalog,
    DegenerateBox,
    GroundTruthTube,
    MalformedRecord,
    ScoreLengthMismatch,
    load_detections,
    load_ground_truth,
    load_paths,
    load_tubes,
    save_detections,
    save_ground_truth,
    save_paths,
    save_tubes,
)

from conftest import random_box, random_video


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def det_record(video_id="v1", num_frames=2, scores_len=3):
    frames = []
    for t in range(1, num_frames + 1):
        frames.append(
            {
                "frame_index": t,
                "detections": [
                    {"box": [0, 0, 10, 10], "scores": [0.1] * scores_len}
                ],
            }
        )
    return {"video_id": video_id, "num_frames": num_frames, "frames": frames}


class TestClassCatalog:
    def test_basic(self):
        cat = ClassCatalog(("walk", "run"))
        assert cat.num_classes == 2
        assert cat.background_id == 2
        assert cat.id_of("run") == 1
        assert cat.name_of(0) == "walk"

    def test_rejects_duplicates_and_background(self):
        with pytest.raises(ValueError):
            ClassCatalog(("walk", "walk"))
        with pytest.raises(ValueError):
            ClassCatalog(("walk", "background"))
        with pytest.raises(ValueError):
            ClassCatalog(())

    def test_generic(self):
        cat = ClassCatalog.generic(3)
        assert len(cat.names) == 3


class TestDetectionsIO:
    def test_wellformed_two_frames(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [json.dumps(det_record())])
        videos = load_detections(p)
        assert len(videos) == 1
        assert videos[0].num_frames == 2
        assert videos[0].num_classes == 3

    def test_score_length_error_names_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        bad = det_record()
        bad["frames"][1]["detections"][0]["scores"] = [0.1, 0.2]  # C-1 entries
        write_lines(p, [json.dumps(det_record(video_id="ok")), json.dumps(bad)])
        with pytest.raises(ScoreLengthMismatch) as exc:
            load_detections(p)
        assert exc.value.line == 2

    def test_degenerate_box_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        bad = det_record()
        bad["frames"][0]["detections"][0]["box"] = [10, 0, 10, 10]
        write_lines(p, [json.dumps(bad)])
        with pytest.raises(DegenerateBox) as exc:
            load_detections(p)
        assert exc.value.line == 1

    def test_nonmonotone_frame_index(self, tmp_path):
        p = tmp_path / "d.jsonl"
        bad = det_record()
        bad["frames"][0]["frame_index"] = 2
        bad["frames"][1]["frame_index"] = 1
        write_lines(p, [json.dumps(bad)])
        with pytest.raises(BadFrameIndex):
            load_detections(p)

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, ["{not json"])
        with pytest.raises(MalformedRecord) as exc:
            load_detections(p)
        assert exc.value.line == 1

    def test_missing_field(self, tmp_path):
        p = tmp_path / "d.jsonl"
        rec = det_record()
        del rec["num_frames"]
        write_lines(p, [json.dumps(rec)])
        with pytest.raises(MalformedRecord):
            load_detections(p)

    def test_duplicate_video_id(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [json.dumps(det_record()), json.dumps(det_record())])
        with pytest.raises(MalformedRecord):
            load_detections(p)

    def test_negative_scores_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        rec = det_record()
        rec["frames"][0]["detections"][0]["scores"] = [-0.1, 0.2, 0.3]
        write_lines(p, [json.dumps(rec)])
        with pytest.raises(MalformedRecord):
            load_detections(p)

    def test_num_classes_argument_enforced(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [json.dumps(det_record(scores_len=3))])
        with pytest.raises(ScoreLengthMismatch):
            load_detections(p, num_classes=4)

    def test_roundtrip_identity_randomized(self, tmp_path):
        rng = random.Random(42)
        videos = [
            random_video(rng, rng.randint(1, 5), (0, 4), 3, video_id=f"v{i}")
            for i in range(4)
        ]
        p = tmp_path / "d.jsonl"
        save_detections(videos, p)
        loaded = load_detections(p)
        assert len(loaded) == len(videos)
        for a, b in zip(videos, loaded):
            assert a.video_id == b.video_id
            assert a.num_frames == b.num_frames
            for fa, fb in zip(a.frames, b.frames):
                np.testing.assert_array_equal(fa.boxes, fb.boxes)
                np.testing.assert_array_equal(fa.scores, fb.scores)
                assert fb.raw_scores is None

    def test_roundtrip_preserves_raw_scores(self, tmp_path):
        rng = random.Random(43)
        video = random_video(rng, 3, 2, 2)
        for fr in video.frames:
            fr.raw_scores = fr.scores * 0.5
        p = tmp_path / "d.jsonl"
        save_detections([video], p)
        loaded = load_detections(p)[0]
        for fa, fb in zip(video.frames, loaded.frames):
            np.testing.assert_array_equal(fa.raw_scores, fb.raw_scores)

    def test_empty_frames_need_explicit_classes(self, tmp_path):
        p = tmp_path / "d.jsonl"
        rec = {
            "video_id": "v",
            "num_frames": 1,
            "frames": [{"frame_index": 1, "detections": []}],
        }
        write_lines(p, [json.dumps(rec)])
        with pytest.raises(ScoreLengthMismatch):
            load_detections(p)
        videos = load_detections(p, num_classes=5)
        assert videos[0].num_classes == 5
        assert len(videos[0].frames[0]) == 0


class TestTubeIO:
    def make_tube(self, rng, video_id="v1", class_id=0, start=2, length=3, score=0.5):
        boxes = np.array([random_box(rng) for _ in range(length)])
        return ActionTube(video_id, class_id, start, start + length - 1, boxes, score)

    def test_roundtrip(self, tmp_path, rng):
        tubes = [self.make_tube(rng, class_id=i % 2, start=i) for i in range(5)]
        p = tmp_path / "t.jsonl"
        save_tubes(tubes, p)
        loaded = load_tubes(p)
        for a, b in zip(tubes, loaded):
            assert (a.video_id, a.class_id, a.start, a.end) == (
                b.video_id,
                b.class_id,
                b.start,
                b.end,
            )
            np.testing.assert_array_equal(a.boxes, b.boxes)
            assert a.score == b.score

    def test_one_based_frames_on_disk(self, tmp_path, rng):
        tube = self.make_tube(rng, start=0, length=2)
        p = tmp_path / "t.jsonl"
        save_tubes([tube], p)
        rec = json.loads(p.read_text().splitlines()[0])
        assert rec["start_frame"] == 1
        assert rec["end_frame"] == 2

    def test_empty_tube_list(self, tmp_path):
        p = tmp_path / "t.jsonl"
        save_tubes([], p)
        assert load_tubes(p) == []

    def test_invalid_range_rejected_on_save(self, tmp_path, rng):
        tube = self.make_tube(rng)
        tube.start, tube.end = 5, 3
        with pytest.raises(MalformedRecord):
            save_tubes([tube], tmp_path / "t.jsonl")
        assert not (tmp_path / "t.jsonl").exists()

    def test_invalid_range_rejected_on_load(self, tmp_path):
        p = tmp_path / "t.jsonl"
        rec = {
            "video_id": "v",
            "class_id": 0,
            "start_frame": 4,
            "end_frame": 2,
            "boxes": [[0, 0, 1, 1]],
            "score": 0.5,
        }
        write_lines(p, [json.dumps(rec)])
        with pytest.raises(MalformedRecord):
            load_tubes(p)

    def test_box_count_must_match_range(self, tmp_path):
        p = tmp_path / "t.jsonl"
        rec = {
            "video_id": "v",
            "class_id": 0,
            "start_frame": 1,
            "end_frame": 3,
            "boxes": [[0, 0, 1, 1]],
            "score": 0.5,
        }
        write_lines(p, [json.dumps(rec)])
        with pytest.raises(MalformedRecord):
            load_tubes(p)

    def test_ground_truth_roundtrip(self, tmp_path, rng):
        gts = [
            GroundTruthTube("v1", 1, 0, 2, np.array([random_box(rng) for _ in range(3)]))
        ]
        p = tmp_path / "gt.jsonl"
        save_ground_truth(gts, p)
        loaded = load_ground_truth(p)
        assert loaded[0].class_id == 1
        np.testing.assert_array_equal(loaded[0].boxes, gts[0].boxes)


class TestPathIO:
    def test_roundtrip(self, tmp_path, rng):
        paths = []
        for i in range(3):
            n = rng.randint(1, 6)
            paths.append(
                ActionPath(
                    video_id=f"v{i}",
                    class_id=i,
                    boxes=np.array([random_box(rng) for _ in range(n)]),
                    scores=np.array([rng.uniform(0, 2) for _ in range(n)]),
                    raw_scores=np.array([rng.uniform(0, 1) for _ in range(n)]),
                    energy=rng.uniform(0, 10),
                )
            )
        p = tmp_path / "p.jsonl"
        save_paths(paths, p)
        loaded = load_paths(p)
        for a, b in zip(paths, loaded):
            assert a.video_id == b.video_id and a.class_id == b.class_id
            np.testing.assert_array_equal(a.boxes, b.boxes)
            np.testing.assert_array_equal(a.scores, b.scores)
            np.testing.assert_array_equal(a.raw_scores, b.raw_scores)
            assert a.energy == b.energy

    def test_length_mismatch_rejected(self, tmp_path):
        rec = {
            "video_id": "v",
            "class_id": 0,
            "num_frames": 2,
            "boxes": [[0, 0, 1, 1]],
            "scores": [0.5, 0.5],
            "raw_scores": [0.5, 0.5],
            "energy": 1.0,
        }
        p = tmp_path / "p.jsonl"
        write_lines(p, [json.dumps(rec)])
        with pytest.raises(MalformedRecord):
            load_paths(p)
