"""Pair classification: combine two face descriptors into one vector, train a
bi-class linear SVM on labeled pairs, and fuse per-method decision scores.

The combination is the normalized absolute difference, read per element:
``f_i = |x_i - y_i| / sum_j (x_j + y_j)``.

The SVM minimizes ``0.5*||w||^2 + C * sum_i max(0, 1 - y_i*(w.x_i + b))`` via
sequential minimal optimization on the dual with maximal-violating-pair
selection, which is deterministic for a fixed sample order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureVector

RELATIONS = ("S-S", "B-B", "S-B", "M-D", "M-S", "F-D", "F-S")

SVM_TOL = 1e-6
SVM_MAX_UPDATES = 2_000_000


@dataclass(frozen=True)
class PairSample:
    feature_a: FeatureVector
    feature_b: FeatureVector
    label: int
    relation: str
    smile_type: str

    def __post_init__(self):
        if self.feature_a.descriptor != self.feature_b.descriptor:
            raise ValueError(
                f"descriptor mismatch: {self.feature_a.descriptor!r} vs "
                f"{self.feature_b.descriptor!r}"
            )
        if len(self.feature_a) != len(self.feature_b):
            raise ValueError("paired features must have equal length")
        if self.label not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")

    def combined(self) -> np.ndarray:
        return pair_combine(self.feature_a.values, self.feature_b.values)


def pair_combine(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Normalized absolute difference of two equal-length feature vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    denom = float((x + y).sum())
    if denom <= 0.0:
        raise ValueError("zero total mass: sum of both feature vectors must be positive")
    return np.abs(x - y) / denom


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    C: float
    n_iter: int
    objective: float
    converged: bool = True

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def svm_train(samples, labels, C: float = 1.0, tol: float = SVM_TOL) -> SvmModel:
    """Train the L1-hinge linear SVM.

    Deterministic given the sample order: working pairs are chosen by the
    maximal-violating-pair rule with first-index tie breaking, and the solver
    stops when the KKT violation gap drops below ``tol``.
    """
    X = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"samples {X.shape} and labels {y.shape} do not align")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if not (np.all(np.abs(y) == 1)):
        raise ValueError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise ValueError("single class: training needs both labels")

    n = X.shape[0]
    K = X @ X.T
    alpha = np.zeros(n)
    f = np.zeros(n)  # f_i = sum_j alpha_j y_j K_ij  (decision values without bias)
    n_iter = 0
    converged = False
    while n_iter < SVM_MAX_UPDATES:
        G = y - f  # -y_i * gradient_i of the dual objective
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        Gi = np.where(up, G, -np.inf)
        Gj = np.where(low, G, np.inf)
        i = int(np.argmax(Gi))
        j = int(np.argmin(Gj))
        if Gi[i] - Gj[j] <= tol:
            converged = True
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            eta = 1e-12
        # Platt-style two-variable subproblem on (i, j); alphas within float
        # dust of a bound snap onto it so saturated coordinates leave the
        # violating-pair candidate sets
        snap = 1e-10 * C
        aj_old, ai_old = alpha[j], alpha[i]
        aj = aj_old + y[j] * (Gj[j] - Gi[i]) / eta
        if y[i] != y[j]:
            lo, hi = max(0.0, aj_old - ai_old), min(C, C + aj_old - ai_old)
        else:
            lo, hi = max(0.0, ai_old + aj_old - C), min(C, ai_old + aj_old)
        aj = min(hi, max(lo, aj))
        if aj > C - snap:
            aj = C
        elif aj < snap:
            aj = 0.0
        if aj == aj_old:
            break  # no feasible progress; gap is at numerical resolution
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        if ai > C - snap:
            ai = C
        elif ai < snap:
            ai = 0.0
        alpha[i], alpha[j] = ai, aj
        f += (ai - ai_old) * y[i] * K[i] + (aj - aj_old) * y[j] * K[j]
        n_iter += 1

    w = X.T @ (alpha * y)
    free = (alpha > 1e-8 * C) & (alpha < C * (1 - 1e-8))
    G = y - f
    if np.any(free):
        bias = float(G[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        hi = G[up].max() if np.any(up) else G[low].min()
        lo = G[low].min() if np.any(low) else hi
        bias = float((hi + lo) / 2.0)
    objective = svm_objective(w, bias, X, y, C)
    return SvmModel(weights=w, bias=bias, C=C, n_iter=n_iter,
                    objective=objective, converged=converged)


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = y * (X @ w + b)
    return float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - margins).sum())


def svm_decision(model: SvmModel, x: np.ndarray) -> float:
    """Signed decision value w.x + b; positive means kin."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.weights.shape:
        raise ValueError(f"dimension mismatch: model {model.dim}, input {x.shape}")
    return float(model.weights @ x + model.bias)


def fuse_scores(score_lists) -> np.ndarray:
    """Sum aligned per-method decision scores (simple score-level fusion)."""
    arrays = [np.asarray(s, dtype=np.float64) for s in score_lists]
    if not arrays:
        raise ValueError("need at least one score list")
    length = arrays[0].shape[0]
    for a in arrays:
        if a.shape != (length,):
            raise ValueError("score lists must all have the same length")
    return np.sum(arrays, axis=0)


def save_model(model: SvmModel, descriptor: str, path: str | Path) -> None:
    obj = {
        "descriptor": descriptor,
        "dim": model.dim,
        "C": model.C,
        "bias": model.bias,
        "weights": [float(v) for v in model.weights],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_model(path: str | Path) -> tuple[str, SvmModel]:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    w = np.asarray(obj["weights"], dtype=np.float64)
    if len(w) != obj["dim"]:
        raise ValueError(f"{path}: dim field {obj['dim']} != {len(w)} weights")
    model = SvmModel(weights=w, bias=float(obj["bias"]), C=float(obj["C"]),
                     n_iter=0, objective=float("nan"))
    return obj["descriptor"], model


def save_scores(pair_ids, labels, scores, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "label", "score"])
        for pid, label, score in zip(pair_ids, labels, scores):
            writer.writerow([pid, int(label), repr(float(score))])


def load_scores(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    pair_ids: list[str] = []
    labels: list[int] = []
    scores: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["pair_id", "label", "score"]:
            raise ValueError(f"{path}: expected header pair_id,label,score, got {header}")
        for row in reader:
            if not row:
                continue
            pair_ids.append(row[0])
            labels.append(int(row[1]))
            scores.append(float(row[2]))
    return pair_ids, np.asarray(labels), np.asarray(scores)
