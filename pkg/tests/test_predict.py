"""Future labels, state stacking, sequence splits and the k-NN classifier."""

import itertools

import numpy as np
import pytest

from oracles import knn_reference

from radarblock.predict import (
    KnnModel,
    LabelConfig,
    build_samples,
    future_label,
    knn_fit,
    knn_predict,
    split_sequences,
    stack_states,
)
from radarblock.tracking import TrackState


def track_at(state, track_id=0):
    return TrackState(state=np.array(state, dtype=float), cov=np.eye(4), track_id=track_id)


class TestFutureLabel:
    def test_or_hits_late_bit(self):
        blocked = [0, 0, 0, 0, 1, 0]
        assert future_label(blocked, 0, 5) == 1

    def test_all_zero(self):
        assert future_label([0] * 6, 0, 5) == 0

    def test_window_past_end_skips(self):
        assert future_label([0, 0, 1], 1, 2) is None
        assert future_label([0, 0, 1], 0, 2) == 1

    def test_bad_frame_index(self):
        with pytest.raises(IndexError):
            future_label([0, 1], 5, 1)

    def test_exhaustive_patterns_match_or_loop(self):
        # every bit pattern up to window 10 against an explicit OR loop
        for t_p in (1, 3, 10):
            for bits in itertools.product((0, 1), repeat=t_p):
                blocked = [0] + list(bits)
                expected = 0
                for b in bits:
                    expected = expected or b
                assert future_label(blocked, 0, t_p) == expected

    def test_monotone_in_window(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            blocked = rng.integers(0, 2, size=20)
            for t in range(8):
                labels = [future_label(blocked, t, t_p) for t_p in range(1, 12)]
                labels = [l for l in labels if l is not None]
                assert all(a <= b for a, b in zip(labels, labels[1:]))


class TestStackStates:
    def test_empty_is_all_padding(self):
        out = stack_states([], max_tracks=2)
        assert out.tolist() == [0.0] * 8

    def test_single_track(self):
        out = stack_states([track_at([1, 2, 3, 4])], max_tracks=2)
        assert out.tolist() == [1, 2, 3, 4, 0, 0, 0, 0]

    def test_truncates_by_range_ascending(self):
        far = track_at([30.0, 0.0, 1.0, 0.0], track_id=1)
        near = track_at([5.0, 1.0, 2.0, 0.0], track_id=2)
        mid = track_at([10.0, -3.0, 0.0, 1.0], track_id=3)
        out = stack_states([far, near, mid], max_tracks=2)
        assert out.tolist() == [5.0, 1.0, 2.0, 0.0, 10.0, -3.0, 0.0, 1.0]

    def test_deterministic_for_tied_ranges(self):
        a = track_at([5.0, 0.0, 1.0, 0.0], track_id=7)
        b = track_at([0.0, 5.0, 0.0, 1.0], track_id=3)
        out1 = stack_states([a, b], max_tracks=2)
        out2 = stack_states([b, a], max_tracks=2)
        assert np.array_equal(out1, out2)
        assert out1[:4].tolist() == [0.0, 5.0, 0.0, 1.0]  # lower id first on ties

    def test_max_tracks_validation(self):
        with pytest.raises(ValueError):
            stack_states([], max_tracks=0)


class TestSplitSequences:
    def test_exact_ratio_counts(self):
        split = split_sequences(list(range(100)), seed=1)
        counts = {s: sum(1 for v in split.values() if v == s) for s in ("train", "val", "test")}
        assert counts == {"train": 70, "val": 20, "test": 10}

    def test_nearest_count_rounding(self):
        split = split_sequences(list(range(307)), seed=5)
        counts = {s: sum(1 for v in split.values() if v == s) for s in ("train", "val", "test")}
        assert counts == {"train": 215, "val": 61, "test": 31}

    def test_deterministic(self):
        assert split_sequences(list(range(50)), seed=9) == split_sequences(list(range(50)), seed=9)

    def test_each_sequence_in_exactly_one_split(self):
        ids = list(range(40))
        split = split_sequences(ids, seed=2)
        assert sorted(split) == ids
        assert set(split.values()) <= {"train", "val", "test"}

    def test_too_few_sequences(self):
        with pytest.raises(ValueError, match="at least 10"):
            split_sequences(list(range(9)))

    def test_bad_ratios(self):
        with pytest.raises(ValueError, match="ratios"):
            split_sequences(list(range(20)), ratios=(0.5, 0.5, 0.5))


class TestLabelConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            LabelConfig(obs_window=0)
        with pytest.raises(ValueError):
            LabelConfig(pred_window=0)


class TestBuildSamples:
    def test_frames_without_full_window_skipped(self):
        blocked = np.array([0, 0, 0, 1, 0], dtype=bool)
        states = [[track_at([5, 0, 0, 0])] for _ in range(5)]
        samples = build_samples(
            states, blocked, LabelConfig(obs_window=2, pred_window=2), 1, seq_id=3, split="train"
        )
        # valid t: 1 and 2 (t=0 cut by obs_window, t>2 cut by label window)
        assert [s.frame_index for s in samples] == [1, 2]
        assert [s.label for s in samples] == [1, 1]
        assert all(s.seq_id == 3 and s.split == "train" for s in samples)
        assert all(len(s.features) == 4 for s in samples)


class TestKnn:
    def test_query_equal_to_training_point(self):
        x = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 1.0]])
        y = [0, 1, 0]
        model = knn_fit(x, y, k=1)
        assert knn_predict(model, np.array([5.0, 5.0])) == 1

    def test_majority_vote(self):
        x = np.array([[0.0], [0.1], [0.2], [9.0]])
        y = [1, 1, 0, 0]
        model = knn_fit(x, y, k=3)
        assert knn_predict(model, np.array([0.05])) == 1

    def test_k_must_be_odd_and_fit(self):
        x = np.zeros((4, 2))
        with pytest.raises(ValueError, match="odd"):
            knn_fit(x, [0, 1, 0, 1], k=2)
        with pytest.raises(ValueError, match="exceeds"):
            knn_fit(x, [0, 1, 0, 1], k=5)

    def test_dimension_mismatch(self):
        model = knn_fit(np.zeros((3, 4)), [0, 1, 0], k=1)
        with pytest.raises(ValueError, match="dimension"):
            knn_predict(model, np.zeros(3))

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((500, 8))
        y = rng.integers(0, 2, size=500)
        model = knn_fit(x, y, k=5)
        queries = rng.standard_normal((50, 8))
        preds = knn_predict(model, queries)
        # oracle operates in the same standardized space
        xz = (x - model.mean) / model.std
        qz = (queries - model.mean) / model.std
        expected = [knn_reference(xz, y, q, k=5) for q in qz]
        assert preds.tolist() == expected

    def test_duplicated_training_set_same_nearest_label(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((40, 3))
        y = rng.integers(0, 2, size=40)
        m1 = knn_fit(x, y, k=1)
        m2 = knn_fit(np.vstack([x, x]), np.concatenate([y, y]), k=1)
        q = rng.standard_normal((10, 3))
        assert np.array_equal(knn_predict(m1, q), knn_predict(m2, q))

    def test_distance_ties_prefer_lower_index(self):
        x = np.array([[0.0, 1.0], [0.0, -1.0]])  # equidistant from origin
        model = knn_fit(x, [1, 0], k=1)
        assert knn_predict(model, np.array([0.0, 0.0])) == 1
        model2 = knn_fit(x[::-1], [0, 1], k=1)
        assert knn_predict(model2, np.array([0.0, 0.0])) == 0

    def test_standardization_uses_train_statistics(self):
        x = np.array([[0.0, 100.0], [1.0, 200.0], [2.0, 300.0]])
        model = knn_fit(x, [0, 1, 0], k=1)
        assert model.mean == pytest.approx([1.0, 200.0])
        assert np.all(model.std > 0)

    def test_constant_feature_does_not_divide_by_zero(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        model = knn_fit(x, [0, 1, 0], k=1)
        assert model.std[1] == 1.0
        assert knn_predict(model, np.array([2.0, 5.0])) == 1
