import itertools

import numpy as np
import pytest

from gazeintent.ghmm import (
    ClassifierOutput,
    GhmmModel,
    WindowStatus,
    _log_emissions,
    classify_scores,
    classify_windows,
    fit,
    load_model,
    log_likelihood,
    log_likelihood_batch,
    sample,
    save_model,
    sliding_window_scores,
)
from gazeintent.scene import Action


def random_model(rng, K=3, D=2, hypothesis=None):
    pi = rng.uniform(0.2, 1.0, size=K)
    pi /= pi.sum()
    trans = rng.uniform(0.2, 1.0, size=(K, K))
    trans /= trans.sum(axis=1, keepdims=True)
    means = rng.normal(0, 2.0, size=(K, D))
    variances = rng.uniform(0.2, 1.5, size=(K, D))
    return GhmmModel(pi=pi, trans=trans, means=means, variances=variances, hypothesis=hypothesis)


def brute_force_loglik(model, window):
    """Oracle: sum the joint density over every hidden state path."""
    logb = _log_emissions(model, np.asarray(window, dtype=float))
    T, K = logb.shape
    log_pi = np.log(model.pi)
    log_a = np.log(model.trans)
    total = -np.inf
    for path in itertools.product(range(K), repeat=T):
        lp = log_pi[path[0]] + logb[0, path[0]]
        for t in range(1, T):
            lp += log_a[path[t - 1], path[t]] + logb[t, path[t]]
        total = np.logaddexp(total, lp)
    return total


class TestForward:
    def test_matches_brute_force_enumeration(self, rng):
        for _ in range(30):
            K = int(rng.integers(2, 4))
            T = int(rng.integers(2, 6))
            model = random_model(rng, K=K, D=2)
            window = rng.normal(0, 2.0, size=(T, 2))
            assert log_likelihood(model, window) == pytest.approx(
                brute_force_loglik(model, window), abs=1e-9
            )

    def test_single_state_single_frame_is_gaussian_density(self, rng):
        model = random_model(rng, K=1, D=3)
        x = rng.normal(size=(1, 3))
        expected = float(_log_emissions(model, x)[0, 0])
        assert log_likelihood(model, x) == pytest.approx(expected, abs=1e-12)

    def test_appending_low_density_frame_decreases_score(self, rng):
        model = random_model(rng, K=2, D=2)
        window = rng.normal(0, 1.0, size=(4, 2))
        far = np.full((1, 2), 50.0)  # density << 1 in every state
        longer = np.vstack([window, far])
        assert log_likelihood(model, longer) < log_likelihood(model, window)

    def test_batch_matches_single(self, rng):
        model = random_model(rng, K=4, D=3)
        windows = rng.normal(size=(6, 9, 3))
        batch = log_likelihood_batch(model, windows)
        for i in range(6):
            assert batch[i] == pytest.approx(log_likelihood(model, windows[i]), abs=1e-10)

    def test_sliding_scores_match_per_window(self, rng):
        model = random_model(rng, K=3, D=2)
        rows = rng.normal(size=(2, 30, 2))
        L = 7
        scores = sliding_window_scores(model, rows, L)
        assert np.isnan(scores[:, : L - 1]).all()
        for c in range(2):
            for end in range(L - 1, 30):
                ref = log_likelihood(model, rows[c, end - L + 1 : end + 1])
                assert scores[c, end] == pytest.approx(ref, abs=1e-9)


class TestFit:
    def test_k1_closed_form_mle(self, rng):
        data = [rng.normal(1.5, 2.0, size=(40, 3)) for _ in range(3)]
        model = fit(data, K=1, max_iter=5, seed=0, n_restarts=1)
        pooled = np.vstack(data)
        assert np.allclose(model.means[0], pooled.mean(axis=0), atol=1e-8)
        assert np.allclose(model.variances[0], pooled.var(axis=0), atol=1e-8)

    def test_em_loglik_never_decreases(self, rng):
        for _ in range(8):
            K = int(rng.integers(2, 5))
            seqs = [rng.normal(0, 1.5, size=(rng.integers(10, 40), 3)) for _ in range(4)]
            model = fit(seqs, K=K, max_iter=15, tol=0.0, seed=int(rng.integers(1000)), n_restarts=2)
            history = model.metadata["loglik_history"]
            assert (np.diff(history) >= -1e-8).all()

    def test_generate_and_refit_recovers_likelihood(self, rng):
        true = random_model(rng, K=4, D=2)
        train = [sample(true, 250, rng) for _ in range(8)]  # 2000 frames
        heldout = [sample(true, 200, rng) for _ in range(4)]
        fitted = fit(train, K=4, max_iter=60, tol=1e-6, seed=7, n_restarts=5)
        ll_true = sum(log_likelihood(true, s) for s in heldout)
        ll_fit = sum(log_likelihood(fitted, s) for s in heldout)
        n = sum(len(s) for s in heldout)
        assert ll_fit / n >= ll_true / n - 0.05

    def test_degenerate_data_flagged_and_floored(self):
        seqs = [np.ones((20, 2)) for _ in range(3)]
        model = fit(seqs, K=2, max_iter=5, seed=0, n_restarts=1)
        assert model.metadata["degenerate"] is True
        assert (model.variances >= model.var_floor * (1 - 1e-12)).all()

    def test_needs_enough_rows(self):
        with pytest.raises(ValueError):
            fit([np.zeros((1, 2))], K=4)

    def test_deterministic_given_seed(self, rng):
        seqs = [rng.normal(size=(30, 2)) for _ in range(3)]
        m1 = fit(seqs, K=2, max_iter=10, seed=3, n_restarts=2)
        m2 = fit(seqs, K=2, max_iter=10, seed=3, n_restarts=2)
        assert np.array_equal(m1.means, m2.means)
        assert np.array_equal(m1.trans, m2.trans)


class TestModelValidation:
    def test_bad_pi_rejected(self, rng):
        m = random_model(rng)
        with pytest.raises(ValueError):
            GhmmModel(pi=m.pi * 1.1, trans=m.trans, means=m.means, variances=m.variances)

    def test_bad_rows_rejected(self, rng):
        m = random_model(rng)
        bad = m.trans.copy()
        bad[0, 0] += 0.1
        with pytest.raises(ValueError):
            GhmmModel(pi=m.pi, trans=bad, means=m.means, variances=m.variances)

    def test_floored_variances_required(self, rng):
        m = random_model(rng)
        v = m.variances.copy()
        v[0, 0] = 1e-9
        with pytest.raises(ValueError):
            GhmmModel(pi=m.pi, trans=m.trans, means=m.means, variances=v)


class TestSerialization:
    def test_bit_exact_round_trip(self, rng, tmp_path):
        model = random_model(rng, K=4, D=8, hypothesis=Action.PICK)
        model.metadata = {"seed": 3, "dataset_hash": "abc"}
        path = tmp_path / "model.json"
        save_model(model, path)
        again = load_model(path)
        assert np.array_equal(again.pi, model.pi)
        assert np.array_equal(again.trans, model.trans)
        assert np.array_equal(again.means, model.means)
        assert np.array_equal(again.variances, model.variances)
        assert again.hypothesis is Action.PICK
        window = rng.normal(size=(12, 8))
        assert log_likelihood(again, window) == log_likelihood(model, window)

    def test_version_check(self, tmp_path, rng):
        model = random_model(rng)
        path = tmp_path / "m.json"
        save_model(model, path)
        text = path.read_text().replace('"format_version": 1', '"format_version": 9')
        path.write_text(text)
        with pytest.raises(ValueError, match="format_version"):
            load_model(path)


class TestClassify:
    def _models(self, rng):
        return {
            Action.PICK: random_model(rng, K=2, D=2, hypothesis=Action.PICK),
            Action.PLACE: random_model(rng, K=2, D=2, hypothesis=Action.PLACE),
        }

    def test_all_scores_below_threshold_gives_no_prediction(self):
        scores = {(Action.PICK, "a0"): -5.0, (Action.PLACE, "b1"): -0.01}
        out = classify_scores(scores, threshold=0.0)
        assert out.prediction is None
        assert out.window_status is WindowStatus.OK

    def test_argmax_above_threshold_wins(self):
        scores = {(Action.PICK, "a0"): 3.0, (Action.PICK, "a1"): 5.0, (Action.PLACE, "b0"): -2.0}
        out = classify_scores(scores, threshold=0.0)
        assert out.prediction == (Action.PICK, "a1")
        assert out.confident

    def test_warming_up_distinct_from_below_threshold(self, rng):
        models = self._models(rng)
        windows = {(Action.PICK, "a0"): None, (Action.PLACE, "b0"): None}
        out = classify_windows(models, windows)
        assert out.window_status is WindowStatus.WARMING_UP
        assert out.prediction is None
        assert out.scores == {}

    def test_scores_use_matching_model(self, rng):
        models = self._models(rng)
        win = rng.normal(size=(6, 2))
        windows = {(Action.PICK, "a0"): win, (Action.PLACE, "b0"): win}
        out = classify_windows(models, windows)
        assert out.scores[(Action.PICK, "a0")] == pytest.approx(
            log_likelihood(models[Action.PICK], win)
        )
        assert out.scores[(Action.PLACE, "b0")] == pytest.approx(
            log_likelihood(models[Action.PLACE], win)
        )

    def test_candidate_relabeling_equivariance(self, rng):
        models = self._models(rng)
        wins = {(Action.PICK, f"a{i}"): rng.normal(size=(5, 2)) for i in range(3)}
        out = classify_windows(models, wins)
        permuted = {(Action.PICK, f"a{(i + 1) % 3}"): wins[(Action.PICK, f"a{i}")] for i in range(3)}
        out2 = classify_windows(models, permuted)
        for i in range(3):
            assert out.scores[(Action.PICK, f"a{i}")] == out2.scores[(Action.PICK, f"a{(i + 1) % 3}")]

    def test_deterministic_scores(self, rng):
        models = self._models(rng)
        win = rng.normal(size=(6, 2))
        w = {(Action.PICK, "a0"): win}
        s1 = classify_windows(models, w).scores
        s2 = classify_windows(models, w).scores
        assert s1 == s2
