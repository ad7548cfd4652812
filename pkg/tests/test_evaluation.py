import numpy as np
import pytest

from gazeintent.evaluation import (
    BY_HAND,
    BY_USER,
    DEFAULT_ABLATION_SETS,
    EARLINESS_OFFSETS_MS,
    FULL_FEATURES,
    PhaseRecord,
    cross_validate,
    earliness_from_records,
    feature_set,
    format_ablation_table,
    format_bundle,
    bundle_to_dict,
    intent_classes,
    make_folds,
    metrics_from_records,
    sweep_window,
    zero_excluded,
)
from gazeintent.scene import Hand


def record(true_key, pred_key, phase="pick", t_to_end=0.2, hand=Hand.RIGHT, user=0):
    return PhaseRecord(
        true_key=true_key, pred_key=pred_key, phase_name=phase,
        t_to_end=t_to_end, hand=hand, user_id=user,
    )


class TestMetricDefinitions:
    def test_oracle_classifier_scores_one(self, scene):
        classes = intent_classes(scene)
        records = [record(c, c) for c in classes for _ in range(5)]
        bundle = metrics_from_records(records, classes)
        assert bundle.overall_f1 == pytest.approx(1.0)
        assert bundle.predictability == pytest.approx(1.0)
        assert np.allclose(np.diag(bundle.confusion), 1.0)

    def test_never_confident_classifier(self, scene):
        classes = intent_classes(scene)
        records = [record(c, None) for c in classes]
        bundle = metrics_from_records(records, classes)
        assert bundle.predictability == 0.0
        assert np.isnan(bundle.overall_f1)
        assert all(np.isnan(v) for v in bundle.per_intent_f1.values())

    def test_f1_counts_only_confident_frames(self, scene):
        classes = intent_classes(scene)
        # half the frames unconfident, the confident ones always right
        records = [record(classes[0], classes[0]), record(classes[0], None)]
        bundle = metrics_from_records(records, classes)
        assert bundle.per_intent_f1[classes[0]] == pytest.approx(1.0)
        assert bundle.predictability == pytest.approx(0.5)

    def test_confusion_rows_normalized(self, scene):
        classes = intent_classes(scene)
        records = [
            record(classes[0], classes[0]),
            record(classes[0], classes[1]),
            record(classes[1], classes[1]),
        ]
        bundle = metrics_from_records(records, classes)
        sums = bundle.confusion.sum(axis=1)
        assert sums[0] == pytest.approx(1.0)
        assert sums[1] == pytest.approx(1.0)
        assert (sums[2:] == 0).all()

    def test_missing_class_excluded_from_macro(self, scene):
        classes = intent_classes(scene)
        records = [record(classes[0], classes[0])]
        bundle = metrics_from_records(records, classes)
        assert bundle.overall_f1 == pytest.approx(1.0)
        assert np.isnan(bundle.per_intent_f1[classes[1]])


class TestEarliness:
    def test_ten_bins_per_phase(self):
        assert len(EARLINESS_OFFSETS_MS) == 10
        curves = earliness_from_records([])
        assert len(curves.pick_accuracy) == 10
        assert len(curves.place_predictability) == 10

    def test_all_confident_gives_predictability_one(self):
        records = [
            record("pick:a0", "pick:a0", phase="pick", t_to_end=k * 0.1)
            for k in range(10)
        ]
        curves = earliness_from_records(records)
        assert np.allclose(curves.pick_predictability, 1.0)
        assert np.allclose(curves.pick_accuracy, 1.0)

    def test_bins_are_phase_specific(self):
        records = [record("place:b0", "place:b0", phase="place", t_to_end=0.0)]
        curves = earliness_from_records(records)
        assert curves.place_predictability[-1] == 1.0
        assert curves.pick_predictability[-1] == 0.0


class TestFeatureSets:
    def test_validation(self):
        with pytest.raises(ValueError):
            feature_set([])
        with pytest.raises(ValueError):
            feature_set(["AOI", "XYZ"])
        assert feature_set(("GS",)) == frozenset(("GS",))

    def test_zero_excluded(self, rng):
        rows = rng.uniform(size=(5, 8))
        out = zero_excluded(rows, feature_set(("AOI", "GS")))
        assert (out[:, 5:8] == 0).all()
        assert (out[:, 0:5] == rows[:, 0:5]).all()
        same = zero_excluded(rows, FULL_FEATURES)
        assert same is rows

    def test_default_ablation_sets(self):
        assert len(DEFAULT_ABLATION_SETS) == 4
        assert frozenset(("AOI", "TPA", "GS")) in DEFAULT_ABLATION_SETS


class TestFolds:
    def test_by_user_folds_partition(self, small_dataset):
        folds = make_folds(small_dataset, BY_USER)
        assert len(folds) == 5
        covered = sorted(i for _, test in folds for i in test)
        # every trial appears exactly once as test data
        assert covered == sorted(set(covered))
        users_per_fold = [
            {small_dataset[i].user_id for i in test} for _, test in folds if test
        ]
        flat = [u for us in users_per_fold for u in us]
        assert len(flat) == len(set(flat))

    def test_by_hand_two_folds(self, small_dataset):
        folds = make_folds(small_dataset, BY_HAND)
        assert len(folds) == 2


class TestCrossValidateSmoke:
    def test_by_user_bundle_sane(self, scene, small_dataset, small_feats):
        bundle = cross_validate(
            small_dataset, scene, split=BY_USER, feats=small_feats,
            n_restarts=1, max_iter=8, seed=0,
        )
        assert 0.0 <= bundle.predictability <= 1.0
        assert bundle.metadata["split"] == "user-5"
        assert bundle.confusion.shape == (12, 12)
        rows = bundle.confusion.sum(axis=1)
        assert np.all((np.abs(rows - 1.0) < 1e-6) | (rows == 0.0))
        text = format_bundle(bundle)
        assert "overall macro F1" in text
        d = bundle_to_dict(bundle)
        assert set(d["earliness"]) >= {"offsets_ms", "pick_accuracy"}

    def test_by_hand_bundle(self, scene, small_dataset, small_feats):
        bundle = cross_validate(
            small_dataset, scene, split=BY_HAND, feats=small_feats,
            n_restarts=1, max_iter=8, seed=0,
        )
        assert bundle.metadata["split"] == "hand-2"
        assert 0.0 <= bundle.predictability <= 1.0

    def test_sweep_includes_each_dt(self, scene, small_dataset, small_feats):
        out = sweep_window(
            small_dataset, scene, dts=[0.45], feats=small_feats,
            n_restarts=1, max_iter=8,
        )
        assert len(out) == 1
        assert out[0]["dt"] == 0.45

    def test_ablation_table_format(self):
        table = {
            ("AOI+GS", "user"): {"overall_f1": 0.8, "predictability": 0.7},
            ("AOI+GS", "hand"): {"overall_f1": 0.81, "predictability": 0.72},
        }
        text = format_ablation_table(table)
        assert "AOI+GS" in text and "user" in text and "hand" in text
