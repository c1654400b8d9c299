"""Verification protocol: negative-pair synthesis, leave-one-out evaluation,
ROC/AUC, and per-relation reporting.

Negatives mirror the positives one-for-one: the first video of each positive
pair is re-paired with a video drawn uniformly from the same (relation,
smile-type) subset until the drawn subject has no kinship link, direct or
transitive, to the first subject.  Draws come from the documented SplitMix64
stream so the produced pair lists are reproducible from the seed alone.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureVector
from .kin_classifier import RELATIONS, fuse_scores, pair_combine, svm_decision, svm_train
from .media_io import SMILE_TYPES
from .rng import SplitMix64

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairEntry:
    pair_id: str
    video_a: str
    video_b: str
    subject_a: str
    subject_b: str
    relation: str
    smile_type: str
    label: int

    def __post_init__(self):
        if self.subject_a == self.subject_b:
            raise ValueError(f"{self.pair_id}: pairs a subject with itself")
        if self.label not in (-1, 1):
            raise ValueError(f"{self.pair_id}: label must be +1 or -1")
        if self.smile_type not in SMILE_TYPES:
            raise ValueError(f"{self.pair_id}: unknown smile type {self.smile_type!r}")


@dataclass
class KinPairList:
    entries: list[PairEntry] = field(default_factory=list)

    def positives(self) -> list[PairEntry]:
        return [e for e in self.entries if e.label == 1]

    def negatives(self) -> list[PairEntry]:
        return [e for e in self.entries if e.label == -1]

    def video_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.video_a)
            seen.setdefault(e.video_b)
        return list(seen)


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _video_subjects(entries: list[PairEntry]) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for e in entries:
        for video, subject in ((e.video_a, e.subject_a), (e.video_b, e.subject_b)):
            if mapping.setdefault(video, subject) != subject:
                raise ValueError(f"video {video} listed under two subjects")
    return mapping


def generate_negatives(positives: KinPairList, seed: int) -> KinPairList:
    """Append exactly one negative per positive.

    The replacement video is drawn uniformly (with rejection) from the sorted
    video pool of the positive's own (relation, smile type) subset; a draw is
    valid when its subject is in a different connected component of the
    kinship graph than subject A.
    """
    pos = positives.positives()
    if len(pos) != len(positives.entries):
        raise ValueError("input must contain only positive pairs")
    video_subject = _video_subjects(pos)
    families = _UnionFind()
    for e in pos:
        families.union(e.subject_a, e.subject_b)

    pools: dict[tuple[str, str], list[str]] = {}
    for e in pos:
        key = (e.relation, e.smile_type)
        pool = pools.setdefault(key, [])
        for video in (e.video_a, e.video_b):
            if video not in pool:
                pool.append(video)
    for pool in pools.values():
        pool.sort()

    # fail fast if some subset cannot produce any valid negative
    for e in pos:
        pool = pools[(e.relation, e.smile_type)]
        root = families.find(e.subject_a)
        if not any(families.find(video_subject[v]) != root for v in pool):
            raise ValueError(
                f"subset ({e.relation}, {e.smile_type}) has no subject unrelated "
                f"to {e.subject_a}; cannot generate negatives"
            )

    rng = SplitMix64(seed)
    negatives = []
    for e in pos:
        pool = pools[(e.relation, e.smile_type)]
        root = families.find(e.subject_a)
        while True:
            candidate = pool[rng.bounded(len(pool))]
            if families.find(video_subject[candidate]) != root:
                break
        negatives.append(
            PairEntry(
                pair_id=e.pair_id + "_neg",
                video_a=e.video_a,
                video_b=candidate,
                subject_a=e.subject_a,
                subject_b=video_subject[candidate],
                relation=e.relation,
                smile_type=e.smile_type,
                label=-1,
            )
        )
    return KinPairList(entries=list(pos) + negatives)


def loo_evaluate(samples, labels, C: float = 1.0) -> tuple[float, np.ndarray]:
    """Leave-one-out: N folds for N samples, each trained on the other N-1.

    Returns (accuracy percent, decision score per sample).  A prediction is
    +1 when its score is >= 0.  Folds whose training split loses a class are
    skipped (score NaN, counted as wrong) and logged.
    """
    X = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels).ravel()
    n = X.shape[0]
    if n < 3:
        raise ValueError(f"leave-one-out needs at least 3 samples, got {n}")
    if len(set(y.tolist())) < 2:
        raise ValueError("both classes must be present")
    scores = np.full(n, np.nan)
    correct = 0
    skipped = 0
    mask = np.ones(n, dtype=bool)
    for k in range(n):
        mask[k] = False
        train_y = y[mask]
        if np.all(train_y == train_y[0]):
            skipped += 1
            mask[k] = True
            continue
        model = svm_train(X[mask], train_y, C=C)
        mask[k] = True
        scores[k] = svm_decision(model, X[k])
        predicted = 1 if scores[k] >= 0 else -1
        if predicted == y[k]:
            correct += 1
    if skipped:
        logger.warning("leave-one-out: %d of %d folds skipped (single-class training set)",
                       skipped, n)
    return 100.0 * correct / n, scores


@dataclass(frozen=True)
class RocCurve:
    points: np.ndarray  # (k, 2) rows of (false positive rate, true positive rate)
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """Threshold sweep over the unique scores (ties grouped), trapezoidal AUC.

    The AUC equals the Mann-Whitney statistic with half credit for ties.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).ravel()
    n_pos = int((y == 1).sum())
    n_neg = int((y == -1).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    auc = 0.0
    while i < len(s_sorted):
        j = i
        while j < len(s_sorted) and s_sorted[j] == s_sorted[i]:
            j += 1
        d_tp = int((y_sorted[i:j] == 1).sum())
        d_fp = (j - i) - d_tp
        # trapezoid over the tie block
        auc += (d_fp / n_neg) * ((tp + tp + d_tp) / (2.0 * n_pos))
        tp += d_tp
        fp += d_fp
        points.append((fp / n_neg, tp / n_pos))
        i = j
    return RocCurve(points=np.asarray(points), auc=auc)


@dataclass
class MethodResult:
    name: str
    per_relation: dict[str, float]
    mean_accuracy: float
    whole_accuracy: float
    auc: float
    roc: RocCurve
    whole_scores: np.ndarray


@dataclass
class EvaluationReport:
    methods: list[MethodResult]
    relations: list[str]
    n_samples: int
    fold_count: int
    C: float
    seed: int


def _subset_indices(entries: list[PairEntry]) -> dict[tuple[str, str], list[int]]:
    groups: dict[tuple[str, str], list[int]] = {}
    for i, e in enumerate(entries):
        groups.setdefault((e.relation, e.smile_type), []).append(i)
    return groups


def evaluate_all(
    features_by_method: dict[str, dict[str, FeatureVector]],
    pairs: KinPairList,
    C: float = 1.0,
    seed: int = 0,
) -> EvaluationReport:
    """Per-relation and pooled leave-one-out evaluation, plus the fused row.

    ``features_by_method`` maps method name to {video id -> FeatureVector}.
    Per relation, spontaneous and posed subsets are evaluated separately and
    averaged; the whole set pools every sample into a single run.  With more
    than one method a "fused" result (summed decision scores) is appended.
    """
    entries = pairs.entries
    if not entries:
        raise ValueError("empty pair list")
    labels = np.array([e.label for e in entries])
    needed = pairs.video_ids()
    for method, feats in features_by_method.items():
        missing = [v for v in needed if v not in feats]
        if missing:
            raise ValueError(f"method {method!r} lacks features for: {', '.join(missing)}")

    relations = [r for r in RELATIONS if any(e.relation == r for e in entries)]
    extra = sorted({e.relation for e in entries} - set(relations))
    relations += extra
    groups = _subset_indices(entries)

    per_method_subset_scores: dict[str, dict[tuple[str, str], np.ndarray]] = {}
    results: list[MethodResult] = []
    for method, feats in features_by_method.items():
        X = np.stack([
            pair_combine(feats[e.video_a].values, feats[e.video_b].values)
            for e in entries
        ])
        whole_acc, whole_scores = loo_evaluate(X, labels, C=C)
        subset_scores: dict[tuple[str, str], np.ndarray] = {}
        per_relation: dict[str, float] = {}
        for relation in relations:
            accs = []
            for smile in SMILE_TYPES:
                idx = groups.get((relation, smile))
                if not idx:
                    continue
                acc, scores = loo_evaluate(X[idx], labels[idx], C=C)
                subset_scores[(relation, smile)] = scores
                accs.append(acc)
            per_relation[relation] = float(np.mean(accs))
        per_method_subset_scores[method] = subset_scores
        curve = roc_auc(whole_scores, labels)
        results.append(
            MethodResult(
                name=method,
                per_relation=per_relation,
                mean_accuracy=float(np.mean(list(per_relation.values()))),
                whole_accuracy=whole_acc,
                auc=curve.auc,
                roc=curve,
                whole_scores=whole_scores,
            )
        )

    if len(results) > 1:
        fused_whole = fuse_scores([r.whole_scores for r in results])
        per_relation = {}
        for relation in relations:
            accs = []
            for smile in SMILE_TYPES:
                idx = groups.get((relation, smile))
                if not idx:
                    continue
                fused = fuse_scores([
                    per_method_subset_scores[m][(relation, smile)]
                    for m in features_by_method
                ])
                sub_labels = labels[idx]
                predicted = np.where(fused >= 0, 1, -1)
                accs.append(100.0 * (predicted == sub_labels).mean())
            per_relation[relation] = float(np.mean(accs))
        predicted = np.where(fused_whole >= 0, 1, -1)
        curve = roc_auc(fused_whole, labels)
        results.append(
            MethodResult(
                name="fused",
                per_relation=per_relation,
                mean_accuracy=float(np.mean(list(per_relation.values()))),
                whole_accuracy=100.0 * (predicted == labels).mean(),
                auc=curve.auc,
                roc=curve,
                whole_scores=fused_whole,
            )
        )

    return EvaluationReport(
        methods=results,
        relations=relations,
        n_samples=len(entries),
        fold_count=len(entries),
        C=C,
        seed=seed,
    )


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "relations": report.relations,
        "n_samples": report.n_samples,
        "fold_count": report.fold_count,
        "C": report.C,
        "seed": report.seed,
        "methods": [
            {
                "name": m.name,
                "per_relation": m.per_relation,
                "mean_accuracy": m.mean_accuracy,
                "whole_accuracy": m.whole_accuracy,
                "auc": m.auc,
                "roc_points": [[float(a), float(b)] for a, b in m.roc.points],
            }
            for m in report.methods
        ],
    }


def render_table(report: EvaluationReport) -> str:
    """Plain-text accuracy table: one row per method, relation columns plus
    Mean and Whole set."""
    headers = ["Method"] + report.relations + ["Mean", "Whole set"]
    rows = [headers]
    for m in report.methods:
        row = [m.name]
        row += [f"{m.per_relation[r]:.2f}" for r in report.relations]
        row += [f"{m.mean_accuracy:.2f}", f"{m.whole_accuracy:.2f}"]
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = []
    for k, row in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        if k == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines)


def save_report(report: EvaluationReport, json_path: str | Path,
                text_path: str | Path | None = None) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")
    if text_path is not None:
        Path(text_path).write_text(render_table(report) + "\n", encoding="utf-8")


def save_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in curve.points:
            writer.writerow([repr(float(fpr)), repr(float(tpr))])


_PAIR_FIELDS = ["pair_id", "video_a", "video_b", "subject_a", "subject_b",
                "relation", "smile_type", "label"]


def save_pairs(pairs: KinPairList, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_PAIR_FIELDS)
        for e in pairs.entries:
            writer.writerow([e.pair_id, e.video_a, e.video_b, e.subject_a,
                             e.subject_b, e.relation, e.smile_type, e.label])


def load_pairs(path: str | Path) -> KinPairList:
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _PAIR_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(_PAIR_FIELDS)}")
        for row in reader:
            if not row:
                continue
            entries.append(PairEntry(row[0], row[1], row[2], row[3], row[4],
                                     row[5], row[6], int(row[7])))
    return KinPairList(entries=entries)
