import json

import numpy as np
import pytest

from gazeintent.datasets import (
    DatasetError,
    load_dataset,
    load_header,
    save_dataset,
    scene_from_dict,
    scene_hash,
    scene_to_dict,
    sequence_to_record,
)
from gazeintent.scene import (
    Action,
    Frame,
    Hand,
    HandState,
    IntentLabel,
    PhaseSegment,
    Sequence,
)


def make_sequence(n=6, user=0, trial=0, held=False, rate=120.0):
    frames = []
    for i in range(n):
        right = HandState(
            position=(0.1 + 0.001 * i, 0.2, 0.3),
            velocity=(0.12, 0, -0.05),
            trigger=held,
            held_object="a1" if held else None,
        )
        left = HandState(position=(-0.3, 0.1, 0.1), velocity=(0, 0, 0))
        g = np.array([0.1, 0.9, -0.4])
        g /= np.linalg.norm(g)
        frames.append(Frame(t=i / rate, gaze_dir=g, left=left, right=right))
    label = IntentLabel(Action.PICK, "a1", Hand.RIGHT)
    phases = (PhaseSegment("pick", Hand.RIGHT, label, 0, n),)
    return Sequence(
        frames=tuple(frames), label=label, user_id=user, block="right", trial=trial, phases=phases
    )


class TestRoundTrip:
    def test_ten_sequences_identity(self, tmp_path):
        seqs = [make_sequence(n=5 + i, user=i % 3, trial=i) for i in range(10)]
        path = tmp_path / "data.jsonl"
        save_dataset(path, seqs)
        loaded = load_dataset(path)
        assert loaded == seqs

    def test_gzip_round_trip(self, tmp_path):
        seqs = [make_sequence()]
        path = tmp_path / "data.jsonl.gz"
        save_dataset(path, seqs)
        assert load_dataset(path) == seqs

    def test_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        save_dataset(path, [])
        assert path.read_text().count("\n") == 1  # header only
        assert load_dataset(path) == []

    def test_header_fields(self, tmp_path, scene):
        path = tmp_path / "d.jsonl"
        save_dataset(path, [make_sequence()], rate_hz=120.0, scene=scene)
        header = load_header(path)
        assert header["format_version"] == 1
        assert header["rate_hz"] == 120.0
        assert header["scene_hash"] == scene_hash(scene)


class TestErrors:
    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps({"format_version": 99, "rate_hz": 120.0}) + "\n")
        with pytest.raises(DatasetError, match="format_version"):
            load_dataset(path)

    def test_malformed_record_reports_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        save_dataset(path, [make_sequence()])
        with open(path, "a") as fh:
            fh.write("{not json\n")
        with pytest.raises(DatasetError, match="line 3"):
            load_dataset(path)

    def test_invariant_violation_rejected(self, tmp_path):
        seq = make_sequence()
        rec = sequence_to_record(seq)
        rec["frames"]["right"]["trigger"][2] = 1  # trigger true, held null
        path = tmp_path / "d.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps({"format_version": 1, "rate_hz": 120.0, "scene_hash": ""}) + "\n")
            fh.write(json.dumps(rec) + "\n")
        with pytest.raises(DatasetError, match="line 2.*held_object"):
            load_dataset(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        with pytest.raises(DatasetError, match="header"):
            load_dataset(path)


class TestSceneSerialization:
    def test_scene_round_trip(self, scene):
        again = scene_from_dict(scene_to_dict(scene))
        assert scene_hash(again) == scene_hash(scene)
        for o1, o2 in zip(scene.objects, again.objects):
            assert o1 == o2

    def test_hash_sensitive_to_geometry(self, scene):
        d = scene_to_dict(scene)
        d["objects"][0]["position"][0] += 0.01
        assert scene_hash(scene_from_dict(d)) != scene_hash(scene)
