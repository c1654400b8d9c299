import numpy as np
import pytest

from svm_reference import svm_reference_solve

from kinvid.features import FeatureVector
from kinvid.kin_classifier import (
    PairSample,
    fuse_scores,
    load_model,
    load_scores,
    pair_combine,
    save_model,
    save_scores,
    svm_decision,
    svm_objective,
    svm_train,
)


class TestPairCombine:
    def test_identical_features_give_zero_vector(self):
        x = np.array([0.2, 0.5, 0.3])
        out = pair_combine(x, x)
        assert np.array_equal(out, np.zeros(3))

    def test_forced_two_dim_case(self):
        out = pair_combine(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert np.array_equal(out, np.array([0.5, 0.5]))

    def test_symmetry_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.random(16)
            y = rng.random(16)
            assert np.array_equal(pair_combine(x, y), pair_combine(y, x))

    def test_nonnegative_and_zero_iff_identical(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.random(8)
            y = rng.random(8)
            f = pair_combine(x, y)
            assert np.all(f >= 0)
            assert np.any(f > 0) == (not np.array_equal(x, y))

    def test_coordinate_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        x = rng.random(10)
        y = rng.random(10)
        perm = rng.permutation(10)
        direct = pair_combine(x[perm], y[perm])
        assert np.array_equal(direct, pair_combine(x, y)[perm])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            pair_combine(np.ones(3), np.ones(4))

    def test_zero_total_mass(self):
        with pytest.raises(ValueError, match="mass"):
            pair_combine(np.zeros(3), np.zeros(3))

    def test_pair_sample_wraps_combine(self):
        a = FeatureVector("lbptop", (), np.array([1.0, 0.0]))
        b = FeatureVector("lbptop", (), np.array([0.0, 1.0]))
        sample = PairSample(a, b, label=1, relation="S-S", smile_type="posed")
        assert np.array_equal(sample.combined(), [0.5, 0.5])

    def test_pair_sample_descriptor_mismatch(self):
        a = FeatureVector("lbptop", (), np.ones(2))
        b = FeatureVector("lpqtop", (), np.ones(2))
        with pytest.raises(ValueError, match="descriptor"):
            PairSample(a, b, label=1, relation="S-S", smile_type="posed")


def _separable_toy(rng, n_per_class=10, spread=0.4):
    pos = rng.normal(0, spread, (n_per_class, 2)) + [2.0, 2.0]
    neg = rng.normal(0, spread, (n_per_class, 2)) + [-2.0, -2.0]
    X = np.vstack([pos, neg])
    y = np.array([1] * n_per_class + [-1] * n_per_class)
    return X, y


class TestSvmTrain:
    def test_separable_toy_perfect_training_accuracy(self):
        rng = np.random.default_rng(10)
        X, y = _separable_toy(rng)
        model = svm_train(X, y, C=1.0)
        predictions = np.sign([svm_decision(model, x) for x in X])
        assert np.array_equal(predictions, y)
        assert model.converged

    def test_objective_matches_reference_solver(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            X = rng.normal(0, 1, (20, 5))
            y = np.where(rng.random(20) < 0.5, 1, -1)
            if np.all(y == y[0]):
                y[0] = -y[0]
            C = float(rng.choice([0.1, 1.0, 10.0]))
            model = svm_train(X, y, C=C)
            _, _, ref_obj = svm_reference_solve(X, y, C)
            rel = abs(model.objective - ref_obj) / max(abs(ref_obj), 1e-12)
            assert rel < 1e-4, f"trial {trial}: {model.objective} vs {ref_obj}"

    def test_single_class_rejected(self):
        X = np.random.default_rng(12).normal(size=(5, 3))
        with pytest.raises(ValueError, match="single class"):
            svm_train(X, np.ones(5), C=1.0)

    def test_deterministic_given_order(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(30, 4))
        y = np.where(rng.random(30) < 0.5, 1, -1)
        y[:2] = [1, -1]
        m1 = svm_train(X, y, C=1.0)
        m2 = svm_train(X, y, C=1.0)
        assert np.array_equal(m1.weights, m2.weights)
        assert m1.bias == m2.bias and m1.n_iter == m2.n_iter

    def test_complementary_slackness(self):
        rng = np.random.default_rng(14)
        X = rng.normal(0, 1, (25, 4))
        y = np.where(rng.random(25) < 0.5, 1, -1)
        y[:2] = [1, -1]
        model = svm_train(X, y, C=1.0)
        margins = y * (X @ model.weights + model.bias)
        loose = margins > 1 + 1e-6
        hinge = np.maximum(0.0, 1.0 - margins)
        assert np.all(hinge[loose] == 0.0)

    def test_scale_invariance_of_labels(self):
        rng = np.random.default_rng(15)
        X = rng.normal(0, 1, (20, 3))
        y = np.where(rng.random(20) < 0.5, 1, -1)
        y[:2] = [1, -1]
        s = 3.7
        m1 = svm_train(X, y, C=2.0)
        m2 = svm_train(s * X, y, C=2.0 / s ** 2)
        for x in X:
            d1 = svm_decision(m1, x)
            d2 = svm_decision(m2, s * x)
            assert np.sign(d1) == np.sign(d2)

    def test_objective_field_consistent(self):
        rng = np.random.default_rng(16)
        X, y = _separable_toy(rng, 5)
        model = svm_train(X, y, C=1.0)
        assert model.objective == pytest.approx(
            svm_objective(model.weights, model.bias, X, y.astype(float), 1.0))


class TestSvmDecision:
    def test_zero_vector_gives_bias(self):
        rng = np.random.default_rng(20)
        X, y = _separable_toy(rng, 4)
        model = svm_train(X, y, C=1.0)
        assert svm_decision(model, np.zeros(2)) == model.bias

    def test_matches_dot_product_oracle(self):
        rng = np.random.default_rng(21)
        X, y = _separable_toy(rng, 6)
        model = svm_train(X, y, C=1.0)
        for _ in range(20):
            x = rng.normal(size=2)
            manual = sum(float(model.weights[i]) * float(x[i]) for i in range(2))
            assert abs(svm_decision(model, x) - (manual + model.bias)) < 1e-12

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(22)
        X, y = _separable_toy(rng, 4)
        model = svm_train(X, y, C=1.0)
        with pytest.raises(ValueError, match="dimension"):
            svm_decision(model, np.zeros(5))


class TestFuseScores:
    def test_single_method_identity(self):
        s = np.array([0.3, -0.2, 1.5])
        assert np.array_equal(fuse_scores([s]), s)

    def test_two_method_sum(self):
        fused = fuse_scores([[1.0, -0.5], [0.2, 0.8]])
        assert np.allclose(fused, [1.2, 0.3], atol=0)

    def test_self_negation_cancels(self):
        s = np.array([0.4, -1.0, 2.0])
        assert np.array_equal(fuse_scores([s, -s]), np.zeros(3))

    def test_rank_preservation_when_methods_agree(self):
        rng = np.random.default_rng(30)
        base = np.sort(rng.normal(size=10))
        lists = [base * k + j for k, j in ((1.0, 0.0), (2.0, 1.0), (0.5, -3.0))]
        fused = fuse_scores(lists)
        assert np.all(np.diff(fused) > 0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            fuse_scores([[1.0, 2.0], [1.0]])


class TestModelAndScoreIo:
    def test_model_round_trip(self, tmp_path):
        rng = np.random.default_rng(40)
        X, y = _separable_toy(rng, 4)
        model = svm_train(X, y, C=2.5)
        path = tmp_path / "model.json"
        save_model(model, "lbptop", path)
        descriptor, again = load_model(path)
        assert descriptor == "lbptop"
        assert np.array_equal(again.weights, model.weights)
        assert again.bias == model.bias and again.C == 2.5

    def test_scores_round_trip(self, tmp_path):
        path = tmp_path / "scores.csv"
        ids = ["p1", "p2", "p3"]
        labels = [1, -1, 1]
        scores = [0.25, -1.5, 1e-17]
        save_scores(ids, labels, scores, path)
        got_ids, got_labels, got_scores = load_scores(path)
        assert got_ids == ids
        assert np.array_equal(got_labels, labels)
        assert np.array_equal(got_scores, scores)
