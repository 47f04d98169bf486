import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from awm.classifier import (
    ClassifierModel,
    FeatureAssembler,
    FeatureVector,
    LabelPolicy,
    TrainConfig,
    assemble_feature,
    predict,
    sample_labels,
    train,
)
from awm.errors import DimensionMismatch, EmptyTrainingSet
from awm.exec_features import ExecVector

from conftest import make_record


# --- synthetic data + independent oracle -------------------------------------

def two_cluster_data(n=200, dim=6, gap=8.0, seed=11):
    """Two well-separated Gaussian clusters; returns (features, labels)."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(loc=0.0, scale=1.0, size=(half, dim))
    b = rng.normal(loc=gap, scale=1.0, size=(n - half, dim))
    x = np.vstack([a, b])
    y = ["alpha"] * half + ["beta"] * (n - half)
    order = rng.permutation(n)
    return x[order], [y[i] for i in order]


def nearest_centroid_accuracy(x_train, y_train, x_test, y_test):
    """Brute-force baseline the trained model must match or beat."""
    classes = sorted(set(y_train))
    centroids = {
        c: x_train[[i for i, y in enumerate(y_train) if y == c]].mean(axis=0) for c in classes
    }
    correct = 0
    for row, label in zip(x_test, y_test):
        best = min(classes, key=lambda c: float(np.linalg.norm(row - centroids[c])))
        correct += best == label
    return correct / len(y_test)


def as_features(x, timestamps=None):
    return [
        FeatureVector(values=row, timestamp=timestamps[i] if timestamps else i)
        for i, row in enumerate(x)
    ]


class TestSampleLabels:
    def _stream(self, n, flagged=frozenset()):
        return [
            make_record(timestamp=i, group=f"g{i % 3}", no_label=(i in flagged) or None)
            for i in range(n)
        ]

    def test_probability_zero_keeps_nothing(self):
        policy = LabelPolicy(mode="random_sample", p_l=0.0, seed=1)
        assert sample_labels(self._stream(100), policy) == []

    def test_hybrid_flag_overrides_probability_one(self):
        records = self._stream(10, flagged={4})
        policy = LabelPolicy(mode="hybrid", p_l=1.0, seed=1)
        kept = sample_labels(records, policy)
        assert len(kept) == 9
        assert all(not r.no_label for r in kept)

    def test_binomial_rate(self):
        records = self._stream(100_000)
        policy = LabelPolicy(mode="random_sample", p_l=0.01, seed=5)
        kept = sample_labels(records, policy)
        sigma = math.sqrt(100_000 * 0.01 * 0.99)
        assert abs(len(kept) - 1000) <= 4 * sigma

    def test_reproducible(self):
        records = self._stream(5000)
        policy = LabelPolicy(mode="random_sample", p_l=0.05, seed=42)
        first = sample_labels(records, policy)
        second = sample_labels(records, policy)
        assert first == second

    def test_manual_keeps_only_submitted(self):
        records = [
            make_record(timestamp=0, group="g1"),
            make_record(timestamp=1),  # unlabeled
            make_record(timestamp=2, group="g2", no_label=True),
        ]
        policy = LabelPolicy(mode="manual", p_l=0.0, seed=1)  # p_l ignored
        kept = sample_labels(records, policy)
        assert [r.timestamp for r in kept] == [0]

    def test_unlabeled_records_never_kept(self):
        records = [make_record(timestamp=i) for i in range(50)]
        policy = LabelPolicy(mode="random_sample", p_l=1.0, seed=1)
        assert sample_labels(records, policy) == []

    @given(
        flags=st.lists(st.sampled_from([None, True, False]), min_size=1, max_size=40),
        p_l=st.floats(0.0, 1.0),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=200)
    def test_hybrid_never_emits_flagged(self, flags, p_l, seed):
        records = [make_record(timestamp=i, group="g", no_label=f) for i, f in enumerate(flags)]
        kept = sample_labels(records, LabelPolicy(mode="hybrid", p_l=p_l, seed=seed))
        assert all(not r.no_label for r in kept)

    def test_bad_policy_rejected(self):
        with pytest.raises(ValueError):
            LabelPolicy(mode="nope")
        with pytest.raises(ValueError):
            LabelPolicy(p_l=1.5)


class TestAssembleFeature:
    def test_concatenation_layout(self):
        z = np.arange(64, dtype=float)
        x = ExecVector(values=np.ones(30), layout={})
        feature = assemble_feature(z, x)
        assert feature.values.size == 94
        assert np.array_equal(feature.values[:64], z)

    def test_missing_execution_features(self):
        z = np.arange(8, dtype=float)
        feature = assemble_feature(z, None)
        assert np.array_equal(feature.values, z)

    def test_dimension_drift_rejected(self):
        assembler = FeatureAssembler()
        assembler.assemble(np.ones(4), np.ones(3))
        with pytest.raises(DimensionMismatch):
            assembler.assemble(np.ones(4), np.ones(5))
        with pytest.raises(DimensionMismatch):
            assembler.assemble(np.ones(2), np.ones(3))

    def test_x_cannot_disappear_mid_run(self):
        assembler = FeatureAssembler()
        assembler.assemble(np.ones(4), np.ones(3))
        with pytest.raises(DimensionMismatch):
            assembler.assemble(np.ones(4), None)


class TestTrainPredict:
    def test_separable_clusters_beat_centroid_oracle(self):
        x, y = two_cluster_data()
        split = 150
        model = train(list(zip(as_features(x[:split]), y[:split])))
        holdout = [predict(model, f) for f in as_features(x[split:])]
        accuracy = sum(p == t for p, t in zip(holdout, y[split:])) / (len(y) - split)
        baseline = nearest_centroid_accuracy(x[:split], y[:split], x[split:], y[split:])
        assert baseline >= 0.95
        assert accuracy >= baseline

    def test_train_accuracy_close_to_holdout(self):
        x, y = two_cluster_data(seed=3)
        split = 150
        model = train(list(zip(as_features(x[:split]), y[:split])))
        train_acc = sum(predict(model, f) == t for f, t in zip(as_features(x[:split]), y[:split])) / split
        hold_acc = sum(predict(model, f) == t for f, t in zip(as_features(x[split:]), y[split:])) / (len(y) - split)
        assert train_acc >= hold_acc - 0.05

    def test_single_class_constant_model(self):
        x = np.random.default_rng(0).normal(size=(10, 4))
        model = train([(f, "only") for f in as_features(x)])
        assert predict(model, FeatureVector(values=np.zeros(4))) == "only"
        assert predict(model, FeatureVector(values=np.full(4, 1e6))) == "only"

    def test_deterministic(self):
        x, y = two_cluster_data(n=60, seed=9)
        pairs = list(zip(as_features(x), y))
        a = train(pairs, TrainConfig(seed=7))
        b = train(pairs, TrainConfig(seed=7))
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)

    def test_training_point_predicts_its_cluster(self):
        x, y = two_cluster_data(n=100, seed=21)
        pairs = list(zip(as_features(x), y))
        model = train(pairs)
        # oracle: nearest centroid on the same data
        centroids = {
            c: x[[i for i, g in enumerate(y) if g == c]].mean(axis=0) for c in sorted(set(y))
        }
        probe = next(i for i, g in enumerate(y) if g == "alpha")
        oracle = min(centroids, key=lambda c: float(np.linalg.norm(x[probe] - centroids[c])))
        assert predict(model, FeatureVector(values=x[probe])) == oracle == "alpha"

    def test_zero_vector_tie_breaks_to_smaller_class(self):
        model = ClassifierModel(
            kind="multinomial_logistic",
            classes=["a", "b"],
            weights=np.array([[1.0, -1.0], [-1.0, 1.0]]),
            bias=np.zeros(2),
            feature_dim=2,
        )
        assert predict(model, FeatureVector(values=np.zeros(2))) == "a"

    def test_argmax_invariant_under_score_shift(self):
        x, y = two_cluster_data(n=40, seed=2)
        model = train(list(zip(as_features(x), y)))
        shifted = ClassifierModel(
            kind=model.kind,
            classes=model.classes,
            weights=model.weights,
            bias=model.bias + 123.456,
            feature_dim=model.feature_dim,
            scale_mean=model.scale_mean,
            scale_std=model.scale_std,
        )
        for row in x[:10]:
            f = FeatureVector(values=row)
            assert predict(model, f) == predict(shifted, f)

    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet):
            train([])

    def test_dimension_mismatch_on_predict(self):
        x, y = two_cluster_data(n=40)
        model = train(list(zip(as_features(x), y)))
        with pytest.raises(DimensionMismatch):
            predict(model, FeatureVector(values=np.zeros(model.feature_dim + 1)))

    def test_model_persistence_round_trip(self, tmp_path):
        x, y = two_cluster_data(n=40, seed=13)
        model = train(list(zip(as_features(x), y)))
        model.save(tmp_path / "model.json")
        loaded = ClassifierModel.load(tmp_path / "model.json")
        assert loaded.classes == model.classes
        for row in x[:5]:
            f = FeatureVector(values=row)
            assert predict(loaded, f) == predict(model, f)
