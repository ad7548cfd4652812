import json
from pathlib import Path

import pytest

from gazeintent.cli import _atomic_write, main
from gazeintent.datasets import load_dataset
from gazeintent.ghmm import save_model
from gazeintent.scene import Action


@pytest.fixture(scope="module")
def data_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "tiny.jsonl"
    rc = main(
        [
            "gen-data", "--users", "1", "--trials-per-block", "2",
            "--seed", "7", "--out", str(out),
        ]
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def models_dir(tmp_path_factory, small_models):
    d = tmp_path_factory.mktemp("models")
    for action, model in small_models.items():
        save_model(model, d / f"{action.value}_model.json")
    return d


class TestGenData:
    def test_counts_and_reproducibility(self, data_path, tmp_path):
        data = load_dataset(data_path)
        assert len(data) == 1 * 4 * 2
        again = tmp_path / "again.jsonl"
        main(["gen-data", "--users", "1", "--trials-per-block", "2", "--seed", "7", "--out", str(again)])
        assert load_dataset(again) == data

    def test_different_seed_differs(self, data_path, tmp_path):
        other = tmp_path / "other.jsonl"
        main(["gen-data", "--users", "1", "--trials-per-block", "2", "--seed", "8", "--out", str(other)])
        assert load_dataset(other) != load_dataset(data_path)


class TestTrainReplay:
    def test_train_then_replay_predicts_correctly(self, data_path, tmp_path):
        out_dir = tmp_path / "models"
        rc = main(
            [
                "train", "--data", str(data_path), "--out-dir", str(out_dir),
                "--restarts", "1", "--max-iter", "8", "--seed", "0",
            ]
        )
        assert rc == 0
        assert (out_dir / "pick_model.json").exists()
        assert (out_dir / "place_model.json").exists()
        est_path = tmp_path / "estimates.jsonl"
        rc = main(
            [
                "replay", "--data", str(data_path), "--models-dir", str(out_dir),
                "--trial", "0", "--out", str(est_path),
            ]
        )
        assert rc == 0
        lines = [json.loads(l) for l in est_path.read_text().splitlines()]
        data = load_dataset(data_path)
        assert len(lines) == len(data[0].frames)
        pick_target = data[0].label.target
        hand = data[0].label.hand.value
        confident = [
            l for l in lines if l[hand]["prediction"] and l[hand]["prediction"]["action"] == "pick"
        ]
        assert confident, "replay never became confident on a training trial"
        assert any(l[hand]["prediction"]["target"] == pick_target for l in confident)

    def test_replay_out_of_range(self, data_path, models_dir):
        with pytest.raises(SystemExit):
            main(["replay", "--data", str(data_path), "--models-dir", str(models_dir), "--trial", "999"])


class TestEval:
    def test_eval_report_files(self, data_path, tmp_path):
        out = tmp_path / "report"
        rc = main(
            [
                "eval", "--data", str(data_path), "--split", "hand",
                "--features", "AOI,GS", "--restarts", "1", "--max-iter", "6",
                "--out", str(out),
            ]
        )
        assert rc == 0
        payload = json.loads(out.with_suffix(".json").read_text())
        assert payload["metadata"]["features"] == ["AOI", "GS"]
        assert "overall_f1" in payload
        assert out.with_suffix(".txt").read_text().startswith("split:")

    def test_bad_feature_set_rejected(self, data_path):
        with pytest.raises(SystemExit):
            main(["eval", "--data", str(data_path), "--features", "AOI,NOPE"])


class TestErrors:
    def test_unknown_flag(self):
        with pytest.raises(SystemExit):
            main(["gen-data", "--nonsense", "1", "--out", "x.jsonl"])

    def test_missing_file(self, tmp_path):
        rc = main(["train", "--data", str(tmp_path / "absent.jsonl"), "--out-dir", str(tmp_path)])
        assert rc != 0

    def test_atomic_write_cleans_up(self, tmp_path):
        target = tmp_path / "out.json"

        def boom(p):
            Path(p).write_text("partial")
            raise RuntimeError("disk full")

        with pytest.raises(RuntimeError):
            _atomic_write(target, boom)
        assert not target.exists()
        assert not target.with_name(target.name + ".tmp").exists()

    def test_config_file_defaults(self, tmp_path, data_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"trials_per_block": 2, "n_users": 1, "seed": 7}))
        out = tmp_path / "cfg_data.jsonl"
        rc = main(["--config", str(cfg), "gen-data", "--out", str(out)])
        assert rc == 0
        assert load_dataset(out) == load_dataset(data_path)

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"nope": 1}))
        with pytest.raises(SystemExit):
            main(["--config", str(cfg), "gen-data", "--out", str(tmp_path / "x.jsonl")])
