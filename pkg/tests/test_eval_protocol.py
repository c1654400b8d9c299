import numpy as np
import pytest

import kinvid.eval_protocol as eval_protocol
from kinvid.eval_protocol import (
    KinPairList,
    PairEntry,
    evaluate_all,
    generate_negatives,
    load_pairs,
    loo_evaluate,
    render_table,
    roc_auc,
    save_pairs,
)
from kinvid.features import FeatureVector
from kinvid.kin_classifier import RELATIONS


def _positive(pid, va, vb, sa, sb, relation="S-S", smile="spontaneous"):
    return PairEntry(pid, va, vb, sa, sb, relation, smile, 1)


def _make_positives(n_families=4, pairs_per_family=2, relation="S-S",
                    smile="spontaneous", start=0):
    entries = []
    for fam in range(start, start + n_families):
        sa, sb = f"s{fam}a", f"s{fam}b"
        for v in range(pairs_per_family):
            entries.append(_positive(
                f"p{fam}_{v}_{relation}_{smile}",
                f"{sa}_v{v}", f"{sb}_v{v}", sa, sb, relation, smile))
    return entries


class TestGenerateNegatives:
    def test_one_negative_per_positive(self):
        positives = KinPairList(_make_positives(5, 3))
        full = generate_negatives(positives, seed=1)
        assert len(full.positives()) == 15
        assert len(full.negatives()) == 15
        assert len(full.entries) == 30

    def test_228_positives_gives_456_total(self):
        entries = []
        fam = 0
        # 228 = 7 relations x 2 smile types x 8 families x ~2 pairs; build exactly
        while len(entries) < 228:
            relation = RELATIONS[fam % 7]
            smile = ("spontaneous", "posed")[fam % 2]
            entries.extend(_make_positives(1, min(2, 228 - len(entries)),
                                           relation, smile, start=fam))
            fam += 1
        positives = KinPairList(entries)
        full = generate_negatives(positives, seed=7)
        assert len(full.positives()) == 228
        assert len(full.negatives()) == 228
        assert len(full.entries) == 456

    def test_two_family_subset_forced_choice(self):
        entries = [
            _positive("p0", "A_v0", "B_v0", "A", "B"),
            _positive("p1", "C_v0", "D_v0", "C", "D"),
        ]
        for seed in range(10):
            full = generate_negatives(KinPairList(entries), seed=seed)
            neg = full.negatives()[0]
            assert neg.video_a == "A_v0"
            assert neg.video_b in ("C_v0", "D_v0")  # never B's video

    def test_transitive_family_graph_respected(self):
        # A-B and B-C are kin; negatives for A must avoid C as well
        entries = [
            _positive("p0", "A_v0", "B_v0", "A", "B"),
            _positive("p1", "B_v1", "C_v0", "B", "C"),
            _positive("p2", "D_v0", "E_v0", "D", "E"),
        ]
        for seed in range(20):
            full = generate_negatives(KinPairList(entries), seed=seed)
            for neg in full.negatives():
                if neg.subject_a in ("A", "B", "C"):
                    assert neg.subject_b in ("D", "E")
                else:
                    assert neg.subject_b in ("A", "B", "C")

    def test_determinism_and_seed_sensitivity(self):
        positives = KinPairList(_make_positives(6, 4))
        a = generate_negatives(positives, seed=3)
        b = generate_negatives(positives, seed=3)
        assert a == b
        assert any(generate_negatives(positives, seed=s) != a for s in range(20))

    def test_balance_per_subset(self):
        entries = (_make_positives(3, 2, "M-D", "posed")
                   + _make_positives(3, 3, "F-S", "spontaneous", start=10))
        full = generate_negatives(KinPairList(entries), seed=0)
        for key, want in ((("M-D", "posed"), 6), (("F-S", "spontaneous"), 9)):
            pos = [e for e in full.positives() if (e.relation, e.smile_type) == key]
            neg = [e for e in full.negatives() if (e.relation, e.smile_type) == key]
            assert len(pos) == want and len(neg) == want

    def test_single_family_subset_rejected(self):
        positives = KinPairList(_make_positives(1, 2))
        with pytest.raises(ValueError, match="S-S"):
            generate_negatives(positives, seed=0)

    def test_negative_input_rejected(self):
        entries = _make_positives(2, 1)
        bad = PairEntry("n0", "x", "y", "sx", "sy", "S-S", "posed", -1)
        with pytest.raises(ValueError, match="positive"):
            generate_negatives(KinPairList(entries + [bad]), seed=0)

    def test_pairs_csv_round_trip(self, tmp_path):
        full = generate_negatives(KinPairList(_make_positives(3, 2)), seed=5)
        path = tmp_path / "pairs.csv"
        save_pairs(full, path)
        assert load_pairs(path) == full


class TestLooEvaluate:
    def test_separable_four_samples(self):
        X = np.array([[2.0, 2.0], [2.5, 1.5], [-2.0, -2.0], [-1.5, -2.5]])
        y = np.array([1, 1, -1, -1])
        accuracy, scores = loo_evaluate(X, y, C=1.0)
        assert accuracy == 100.0
        assert len(scores) == 4

    def test_identical_features_majority_rate_oracle(self):
        # constant features: each fold predicts its training majority, so the
        # analytic LOO accuracy is the rate at which the remaining majority
        # equals the held-out label
        def analytic(labels):
            correct = 0
            for k, held in enumerate(labels):
                rest = labels[:k] + labels[k + 1:]
                majority = 1 if rest.count(1) > rest.count(-1) else -1
                correct += majority == held
            return 100.0 * correct / len(labels)

        X = np.ones((20, 3))
        unbalanced = [1] * 12 + [-1] * 8
        assert analytic(unbalanced) == 60.0
        accuracy, _ = loo_evaluate(X, np.array(unbalanced), C=1.0)
        assert accuracy == analytic(unbalanced)
        # perfectly balanced classes hit the classic LOO pathology: the
        # training majority is always the class not held out
        balanced = [1] * 10 + [-1] * 10
        assert analytic(balanced) == 0.0
        accuracy, _ = loo_evaluate(X, np.array(balanced), C=1.0)
        assert accuracy == analytic(balanced)

    def test_returns_n_scores_and_trains_n_models(self, monkeypatch):
        calls = {"n": 0}
        real = eval_protocol.svm_train

        def counting(*args, **kwargs):
            calls["n"] += 1
            return real(*args, **kwargs)

        monkeypatch.setattr(eval_protocol, "svm_train", counting)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(9, 3))
        y = np.array([1, -1] * 4 + [1])
        _, scores = loo_evaluate(X, y, C=1.0)
        assert len(scores) == 9
        assert calls["n"] == 9

    def test_needs_three_samples_and_both_classes(self):
        with pytest.raises(ValueError):
            loo_evaluate(np.ones((2, 2)), np.array([1, -1]))
        with pytest.raises(ValueError):
            loo_evaluate(np.ones((4, 2)), np.array([1, 1, 1, 1]))


def _mw_oracle(scores, labels):
    """O(n^2) Mann-Whitney with half-credit ties."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == -1]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestRocAuc:
    def test_perfect_separation(self):
        curve = roc_auc([3.0, 2.0, -1.0, -2.0], [1, 1, -1, -1])
        assert curve.auc == 1.0

    def test_all_scores_equal(self):
        curve = roc_auc([0.5] * 6, [1, -1, 1, -1, 1, -1])
        assert curve.auc == 0.5

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(5, 25))
            scores = rng.choice([-1.5, -0.5, 0.0, 0.5, 1.5, 2.5], n)
            labels = np.where(rng.random(n) < 0.5, 1, -1)
            if len(set(labels)) < 2:
                labels[0] = -labels[0]
            curve = roc_auc(scores, labels)
            assert abs(curve.auc - _mw_oracle(scores, labels)) < 1e-12

    def test_curve_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(2)
        scores = rng.normal(size=30)
        labels = np.where(rng.random(30) < 0.4, 1, -1)
        labels[:2] = [1, -1]
        curve = roc_auc(scores, labels)
        assert tuple(curve.points[0]) == (0.0, 0.0)
        assert tuple(curve.points[-1]) == (1.0, 1.0)
        assert np.all(np.diff(curve.points[:, 0]) >= 0)
        assert np.all(np.diff(curve.points[:, 1]) >= 0)

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=40)
        labels = np.where(rng.random(40) < 0.5, 1, -1)
        labels[:2] = [1, -1]
        a = roc_auc(scores, labels)
        b = roc_auc(np.exp(scores) * 3 + 1, labels)
        assert a.auc == pytest.approx(b.auc, abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            roc_auc([1.0, 2.0], [1, 1])


def _feature_map(pairs, rng, dim=6, signal=True):
    """Features per video: kin pairs similar when signal=True."""
    feats = {}
    for e in pairs.entries:
        for video, subject in ((e.video_a, e.subject_a), (e.video_b, e.subject_b)):
            if video in feats:
                continue
            base_seed = abs(hash(subject[:-1] if signal else video)) % (2 ** 32)
            base = np.random.default_rng(base_seed).random(dim) + 0.1
            feats[video] = FeatureVector("toy", (), base + 0.01 * rng.random(dim))
    return feats


class TestEvaluateAll:
    def _pairs(self):
        entries = []
        for i, relation in enumerate(RELATIONS):
            entries.extend(_make_positives(2, 2, relation, "spontaneous", start=10 * i))
            entries.extend(_make_positives(2, 2, relation, "posed", start=10 * i + 5))
        return generate_negatives(KinPairList(entries), seed=0)

    def test_report_structure_and_mean(self):
        pairs = self._pairs()
        rng = np.random.default_rng(0)
        methods = {"toyA": _feature_map(pairs, rng), "toyB": _feature_map(pairs, rng)}
        report = evaluate_all(methods, pairs, C=1.0, seed=42)
        assert report.relations == list(RELATIONS)
        assert report.n_samples == len(pairs.entries)
        assert report.seed == 42
        names = [m.name for m in report.methods]
        assert names == ["toyA", "toyB", "fused"]
        for m in report.methods:
            assert set(m.per_relation) == set(RELATIONS)
            assert m.mean_accuracy == pytest.approx(
                np.mean(list(m.per_relation.values())), abs=1e-9)
            assert 0.0 <= m.whole_accuracy <= 100.0
            assert 0.0 <= m.auc <= 1.0
        table = render_table(report)
        for column in list(RELATIONS) + ["Mean", "Whole set"]:
            assert column in table

    def test_missing_features_listed(self):
        pairs = self._pairs()
        rng = np.random.default_rng(1)
        feats = _feature_map(pairs, rng)
        victim = pairs.entries[0].video_a
        del feats[victim]
        with pytest.raises(ValueError, match=victim):
            evaluate_all({"toy": feats}, pairs, C=1.0)

    def test_whole_set_counts(self):
        pairs = self._pairs()
        rng = np.random.default_rng(2)
        report = evaluate_all({"toy": _feature_map(pairs, rng)}, pairs, C=1.0)
        total = sum(1 for _ in pairs.entries)
        assert report.fold_count == total
        assert len(report.methods[0].whole_scores) == total

    def test_fused_absent_for_single_method(self):
        pairs = self._pairs()
        rng = np.random.default_rng(3)
        report = evaluate_all({"toy": _feature_map(pairs, rng)}, pairs, C=1.0)
        assert [m.name for m in report.methods] == ["toy"]
