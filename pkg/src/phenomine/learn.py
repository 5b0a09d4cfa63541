"""Five stay-length classifiers, written against plain numpy.

Nothing here wraps an ML library. Each model is a small dataclass with
predict_proba plus to_dict/from_dict for the JSON model store:

* knn: k=3 nearest neighbours, Euclidean, vote fractions.
* mlr: multinomial logistic regression, full-batch gradient descent.
* svm: one-vs-rest linear SVM trained with the Pegasos subgradient
  schedule, per-class sigmoid calibration on the training scores.
* adaboost: SAMME over depth-1 stumps with exhaustive midpoint
  threshold search.
* rf: bagged CART trees, Gini splits, sqrt-feature subsets per node.

Ties everywhere resolve to the lowest index (row, class, feature, or
threshold), which keeps every fit reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .cohort import LosCategory
from .errors import (
    DegenerateConfig,
    DegenerateData,
    DimensionMismatch,
    EmptyTest,
    NonFinite,
    WidthMismatch,
)
from .features import FeatureMatrix

CLASSIFIERS = ("knn", "mlr", "svm", "adaboost", "rf")
N_CLASSES = 5

KNN_K = 3
MLR_LEARNING_RATE = 0.1
MLR_L2 = 1e-4
MLR_MAX_ITER = 500
MLR_TOL = 1e-6
SVM_C = 1.0
SVM_EPOCHS = 200
ADABOOST_ROUNDS = 100
RF_TREES = 100
RF_MAX_DEPTH = 12
RF_FEATURES = "sqrt"


def _check_features(x: np.ndarray, n_features: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d feature array, got shape {x.shape}")
    if x.shape[1] != n_features:
        raise WidthMismatch(
            f"model was trained on {n_features} features, rows have {x.shape[1]}"
        )
    return x


# ---------------------------------------------------------------------------
# k nearest neighbours
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KnnModel:
    kind = "knn"
    x: np.ndarray
    y: np.ndarray
    k: int
    n_classes: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = _check_features(x, self.x.shape[1])
        out = np.zeros((x.shape[0], self.n_classes))
        for i, row in enumerate(x):
            dist = np.sqrt(((self.x - row) ** 2).sum(axis=1))
            nearest = np.argsort(dist, kind="stable")[: self.k]
            for j in nearest:
                out[i, self.y[j]] += 1.0
        return out / self.k

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "k": self.k,
            "n_classes": self.n_classes,
        }

    @staticmethod
    def from_dict(d: dict) -> "KnnModel":
        return KnnModel(
            x=np.asarray(d["x"], dtype=np.float64),
            y=np.asarray(d["y"], dtype=np.int64),
            k=int(d["k"]),
            n_classes=int(d["n_classes"]),
        )


def _train_knn(x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> KnnModel:
    if x.shape[0] < KNN_K:
        raise DegenerateData(f"knn needs at least {KNN_K} training rows, got {x.shape[0]}")
    return KnnModel(x=x.copy(), y=y.copy(), k=KNN_K, n_classes=n_classes)


# ---------------------------------------------------------------------------
# multinomial logistic regression
# ---------------------------------------------------------------------------


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def mlr_loss_grad(
    w: np.ndarray, xb: np.ndarray, y: np.ndarray, n_classes: int, l2: float
) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy plus L2 on the non-bias rows, with gradient.

    w has shape (n_features + 1, n_classes); xb already carries the
    trailing bias column of ones. Exposed as a plain function so the
    gradient can be checked against finite differences.
    """
    n = xb.shape[0]
    proba = _softmax(xb @ w)
    eps = 1e-300
    loss = -float(np.mean(np.log(proba[np.arange(n), y] + eps)))
    loss += 0.5 * l2 * float((w[:-1] ** 2).sum())
    onehot = np.zeros_like(proba)
    onehot[np.arange(n), y] = 1.0
    grad = xb.T @ (proba - onehot) / n
    grad[:-1] += l2 * w[:-1]
    return loss, grad


@dataclass(frozen=True)
class MlrModel:
    kind = "mlr"
    w: np.ndarray  # (n_features + 1) x n_classes
    n_classes: int
    iterations_run: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = _check_features(x, self.w.shape[0] - 1)
        xb = np.hstack([x, np.ones((x.shape[0], 1))])
        return _softmax(xb @ self.w)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "w": self.w.tolist(),
            "n_classes": self.n_classes,
            "iterations_run": self.iterations_run,
        }

    @staticmethod
    def from_dict(d: dict) -> "MlrModel":
        return MlrModel(
            w=np.asarray(d["w"], dtype=np.float64),
            n_classes=int(d["n_classes"]),
            iterations_run=int(d["iterations_run"]),
        )


def _train_mlr(x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> MlrModel:
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    w = np.zeros((xb.shape[1], n_classes))
    it = 0
    for it in range(1, MLR_MAX_ITER + 1):
        _, grad = mlr_loss_grad(w, xb, y, n_classes, MLR_L2)
        if np.abs(grad).max() < MLR_TOL:
            it -= 1
            break
        w -= MLR_LEARNING_RATE * grad
    return MlrModel(w=w, n_classes=n_classes, iterations_run=it)


# ---------------------------------------------------------------------------
# linear SVM (one vs rest, Pegasos schedule, calibrated)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pegasos(x, s, perms, lam):
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    t = 0
    for e in range(perms.shape[0]):
        for p in range(n):
            i = perms[e, p]
            t += 1
            eta = 1.0 / (lam * t)
            margin = s[i] * (np.dot(w, x[i]) + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * s[i] * x[i]
                b += eta * s[i]
    return w, b


def _platt(scores: np.ndarray, positive: np.ndarray) -> Tuple[float, float]:
    """Sigmoid calibration of decision scores, Newton with backtracking."""
    prior1 = float(positive.sum())
    prior0 = float(len(positive) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(positive, hi, lo)
    a = 0.0
    b = math.log((prior0 + 1.0) / (prior1 + 1.0))

    def objective(aa: float, bb: float) -> float:
        f = aa * scores + bb
        return float(
            np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-f)),
                            (t - 1.0) * f + np.log1p(np.exp(f))))
        )

    fval = objective(a, b)
    sigma = 1e-12
    for _ in range(100):
        f = a * scores + b
        p = np.where(f >= 0, np.exp(-f) / (1.0 + np.exp(-f)), 1.0 / (1.0 + np.exp(f)))
        d2 = p * (1.0 - p)
        h11 = sigma + float(np.sum(scores * scores * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(scores * d2))
        d1 = t - p
        g1 = float(np.sum(scores * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return a, b


@dataclass(frozen=True)
class SvmModel:
    kind = "svm"
    w: np.ndarray        # n_classes x n_features
    b: np.ndarray        # n_classes
    platt_a: np.ndarray  # n_classes
    platt_b: np.ndarray  # n_classes
    n_classes: int

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = _check_features(x, self.w.shape[1])
        return x @ self.w.T + self.b

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        scores = self.decision(x)
        f = self.platt_a * scores + self.platt_b
        p = np.where(f >= 0, np.exp(-f) / (1.0 + np.exp(-f)), 1.0 / (1.0 + np.exp(f)))
        return p / p.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "w": self.w.tolist(),
            "b": self.b.tolist(),
            "platt_a": self.platt_a.tolist(),
            "platt_b": self.platt_b.tolist(),
            "n_classes": self.n_classes,
        }

    @staticmethod
    def from_dict(d: dict) -> "SvmModel":
        return SvmModel(
            w=np.asarray(d["w"], dtype=np.float64),
            b=np.asarray(d["b"], dtype=np.float64),
            platt_a=np.asarray(d["platt_a"], dtype=np.float64),
            platt_b=np.asarray(d["platt_b"], dtype=np.float64),
            n_classes=int(d["n_classes"]),
        )


def _train_svm(x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> SvmModel:
    n = x.shape[0]
    lam = 1.0 / (SVM_C * n)
    rng = np.random.default_rng(seed)
    perms = np.vstack([rng.permutation(n) for _ in range(SVM_EPOCHS)]).astype(np.int64)
    ws, bs, pas, pbs = [], [], [], []
    for c in range(n_classes):
        s = np.where(y == c, 1.0, -1.0)
        w, b = _pegasos(x, s, perms, lam)
        scores = x @ w + b
        pa, pb = _platt(scores, y == c)
        ws.append(w)
        bs.append(b)
        pas.append(pa)
        pbs.append(pb)
    return SvmModel(
        w=np.vstack(ws), b=np.asarray(bs),
        platt_a=np.asarray(pas), platt_b=np.asarray(pbs),
        n_classes=n_classes,
    )


# ---------------------------------------------------------------------------
# AdaBoost (SAMME) over decision stumps
# ---------------------------------------------------------------------------


def best_stump(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, n_classes: int
) -> Optional[Tuple[float, int, float, int, int]]:
    """Exhaustive weighted search over midpoint thresholds.

    Returns (weighted_error, feature, threshold, left_class,
    right_class) or None when every feature is constant. Ties go to the
    lowest feature index, then the lowest threshold.
    """
    n, d = x.shape
    totals = np.zeros(n_classes)
    np.add.at(totals, y, w)
    total_w = float(w.sum())
    best = None
    for f in range(d):
        order = np.argsort(x[:, f], kind="stable")
        sv = x[order, f]
        change = np.flatnonzero(sv[1:] != sv[:-1])
        if change.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y[order]] = w[order]
        cum = np.cumsum(onehot, axis=0)
        left = cum[change]
        left_tot = left.sum(axis=1)
        right = totals[None, :] - left
        errs = (left_tot - left.max(axis=1)) + ((total_w - left_tot) - right.max(axis=1))
        i = int(np.argmin(errs))
        if best is None or errs[i] < best[0]:
            thr = 0.5 * (sv[change[i]] + sv[change[i] + 1])
            best = (
                float(errs[i]), f, float(thr),
                int(np.argmax(left[i])), int(np.argmax(right[i])),
            )
    return best


@dataclass(frozen=True)
class AdaBoostModel:
    kind = "adaboost"
    stumps: Tuple[Tuple[int, float, int, int, float], ...]  # f, thr, left, right, alpha
    priors: np.ndarray
    n_features: int
    n_classes: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = _check_features(x, self.n_features)
        if not self.stumps:
            return np.tile(self.priors, (x.shape[0], 1))
        votes = np.zeros((x.shape[0], self.n_classes))
        for f, thr, left, right, alpha in self.stumps:
            mask = x[:, f] <= thr
            votes[mask, left] += alpha
            votes[~mask, right] += alpha
        return votes / votes.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "stumps": [list(s) for s in self.stumps],
            "priors": self.priors.tolist(),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
        }

    @staticmethod
    def from_dict(d: dict) -> "AdaBoostModel":
        return AdaBoostModel(
            stumps=tuple(
                (int(f), float(t), int(l), int(r), float(a)) for f, t, l, r, a in d["stumps"]
            ),
            priors=np.asarray(d["priors"], dtype=np.float64),
            n_features=int(d["n_features"]),
            n_classes=int(d["n_classes"]),
        )


def _train_adaboost(x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> AdaBoostModel:
    n = x.shape[0]
    priors = np.bincount(y, minlength=n_classes).astype(np.float64)
    priors /= priors.sum()
    w = np.full(n, 1.0 / n)
    stumps: List[Tuple[int, float, int, int, float]] = []
    for _ in range(ADABOOST_ROUNDS):
        found = best_stump(x, y, w, n_classes)
        if found is None:
            break
        err_w, f, thr, left, right = found
        err = err_w / float(w.sum())
        eps = 1e-10
        clipped = min(max(err, eps), 1.0 - eps)
        alpha = math.log((1.0 - clipped) / clipped) + math.log(n_classes - 1.0)
        if alpha <= 0.0:
            break
        stumps.append((f, thr, left, right, alpha))
        pred = np.where(x[:, f] <= thr, left, right)
        w = w * np.exp(alpha * (pred != y))
        w /= w.sum()
        if err_w <= 0.0:
            break
    return AdaBoostModel(
        stumps=tuple(stumps), priors=priors, n_features=x.shape[1], n_classes=n_classes
    )


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------

_LEAF = -1


def _gini_split(
    x: np.ndarray, y: np.ndarray, rows: np.ndarray, feats: np.ndarray, n_classes: int
) -> Optional[Tuple[int, float]]:
    """Best (feature, threshold) by Gini among the given rows and features.

    Maximizes sum over children of (class count squares / child size),
    which orders splits identically to minimizing weighted Gini.
    """
    n = rows.size
    best_gain = None
    best = None
    for f in feats:
        order = rows[np.argsort(x[rows, f], kind="stable")]
        sv = x[order, f]
        change = np.flatnonzero(sv[1:] != sv[:-1])
        if change.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[change]
        left_n = change + 1.0
        right = cum[-1][None, :] - left
        right_n = n - left_n
        gain = (left ** 2).sum(axis=1) / left_n + (right ** 2).sum(axis=1) / right_n
        i = int(np.argmax(gain))
        if best_gain is None or gain[i] > best_gain:
            best_gain = float(gain[i])
            best = (int(f), float(0.5 * (sv[change[i]] + sv[change[i] + 1])))
    return best


def _build_tree(
    x: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    rng: np.random.Generator,
    n_classes: int,
    max_depth: int,
    n_subset: int,
    nodes: List[list],
    depth: int,
) -> int:
    counts = np.bincount(y[rows], minlength=n_classes).astype(np.float64)
    if depth >= max_depth or rows.size < 2 or np.count_nonzero(counts) == 1:
        nodes.append([_LEAF, 0.0, -1, -1, (counts / counts.sum()).tolist()])
        return len(nodes) - 1
    feats = np.sort(rng.choice(x.shape[1], size=n_subset, replace=False))
    split = _gini_split(x, y, rows, feats, n_classes)
    if split is None:
        split = _gini_split(x, y, rows, np.arange(x.shape[1]), n_classes)
    if split is None:
        nodes.append([_LEAF, 0.0, -1, -1, (counts / counts.sum()).tolist()])
        return len(nodes) - 1
    f, thr = split
    mask = x[rows, f] <= thr
    if mask.all() or not mask.any():
        # midpoint rounded onto an endpoint, so the cut separates nothing
        nodes.append([_LEAF, 0.0, -1, -1, (counts / counts.sum()).tolist()])
        return len(nodes) - 1
    me = len(nodes)
    nodes.append([f, thr, -1, -1, None])
    nodes[me][2] = _build_tree(x, y, rows[mask], rng, n_classes, max_depth, n_subset, nodes, depth + 1)
    nodes[me][3] = _build_tree(x, y, rows[~mask], rng, n_classes, max_depth, n_subset, nodes, depth + 1)
    return me


@dataclass(frozen=True)
class ForestModel:
    kind = "rf"
    trees: Tuple[Tuple[tuple, ...], ...]  # per tree: nodes, root at index 0
    n_features: int
    n_classes: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = _check_features(x, self.n_features)
        out = np.zeros((x.shape[0], self.n_classes))
        for tree in self.trees:
            for i, row in enumerate(x):
                node = tree[0]
                while node[0] != _LEAF:
                    node = tree[node[2]] if row[node[0]] <= node[1] else tree[node[3]]
                out[i] += node[4]
        return out / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "trees": [[list(n) for n in tree] for tree in self.trees],
            "n_features": self.n_features,
            "n_classes": self.n_classes,
        }

    @staticmethod
    def from_dict(d: dict) -> "ForestModel":
        trees = []
        for tree in d["trees"]:
            trees.append(tuple(
                (int(n[0]), float(n[1]), int(n[2]), int(n[3]),
                 None if n[4] is None else tuple(float(v) for v in n[4]))
                for n in tree
            ))
        return ForestModel(
            trees=tuple(trees),
            n_features=int(d["n_features"]),
            n_classes=int(d["n_classes"]),
        )


def _train_rf(x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> ForestModel:
    n, d = x.shape
    n_subset = max(1, int(math.sqrt(d)))
    trees = []
    for t in range(RF_TREES):
        rng = np.random.default_rng(seed + t)
        rows = rng.integers(0, n, size=n)
        nodes: List[list] = []
        _build_tree(x, y, rows, rng, n_classes, RF_MAX_DEPTH, n_subset, nodes, 0)
        trees.append(tuple(
            (node[0], node[1], node[2], node[3],
             None if node[4] is None else tuple(node[4]))
            for node in nodes
        ))
    return ForestModel(trees=tuple(trees), n_features=d, n_classes=n_classes)


# ---------------------------------------------------------------------------
# dispatch, prediction, metrics
# ---------------------------------------------------------------------------

_TRAINERS = {
    "knn": _train_knn,
    "mlr": _train_mlr,
    "svm": _train_svm,
    "adaboost": _train_adaboost,
    "rf": _train_rf,
}

_MODEL_TYPES = {
    "knn": KnnModel,
    "mlr": MlrModel,
    "svm": SvmModel,
    "adaboost": AdaBoostModel,
    "rf": ForestModel,
}


def train(name: str, matrix: FeatureMatrix, n_classes: int = N_CLASSES, seed: int = 0):
    if name not in _TRAINERS:
        raise DegenerateConfig(f"unknown classifier {name!r}; pick one of {CLASSIFIERS}")
    if matrix.x.shape[0] == 0:
        raise DegenerateData("cannot train on an empty matrix")
    if not np.all(np.isfinite(matrix.x)):
        raise NonFinite("training features contain NaN or infinity")
    if int(matrix.y.max()) >= n_classes or int(matrix.y.min()) < 0:
        raise DegenerateData(
            f"labels outside [0, {n_classes}): {sorted(set(matrix.y.tolist()))}"
        )
    if np.unique(matrix.y).size < 2:
        raise DegenerateData("training labels contain a single class")
    return _TRAINERS[name](matrix.x, matrix.y, n_classes, seed)


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind not in _MODEL_TYPES:
        raise DegenerateConfig(f"unknown model kind {kind!r}")
    return _MODEL_TYPES[kind].from_dict(d)


def predict(model, x: np.ndarray) -> np.ndarray:
    """Class with the largest probability; the lowest index wins ties."""
    return np.argmax(model.predict_proba(x), axis=1)


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[int(t), int(p)] += 1
    return cm


def accuracy(cm: np.ndarray) -> float:
    return float(np.trace(cm)) / float(cm.sum())


def macro_precision(cm: np.ndarray) -> float:
    """Mean over all classes; a class never predicted contributes 0."""
    vals = []
    for c in range(cm.shape[0]):
        denom = cm[:, c].sum()
        vals.append(float(cm[c, c]) / float(denom) if denom > 0 else 0.0)
    return float(np.mean(vals))


def macro_recall(cm: np.ndarray) -> float:
    """Mean over all classes; a class with no true rows contributes 0."""
    vals = []
    for c in range(cm.shape[0]):
        denom = cm[c, :].sum()
        vals.append(float(cm[c, c]) / float(denom) if denom > 0 else 0.0)
    return float(np.mean(vals))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sx = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_binary(scores: np.ndarray, positive: np.ndarray) -> float:
    """Rank-sum AUC; tied scores count half, per the midrank convention."""
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateData("AUC needs both positive and negative rows")
    ranks = _midranks(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_auc(y_true: np.ndarray, proba: np.ndarray, n_classes: int) -> float:
    """One-vs-rest AUC averaged over classes present in the test rows.

    A class with no positives or no negatives has no defined curve and
    is left out of the mean; if every class is degenerate the score is
    the chance value 0.5.
    """
    vals = []
    for c in range(n_classes):
        positive = y_true == c
        if positive.all() or not positive.any():
            continue
        vals.append(auc_binary(proba[:, c], positive))
    return float(np.mean(vals)) if vals else 0.5


@dataclass(frozen=True)
class ClassReport:
    """One-vs-rest view of a single class; auc is None when undefined."""

    label: str
    support: int
    precision: float
    recall: float
    auc: Optional[float]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "support": self.support,
            "precision": self.precision,
            "recall": self.recall,
            "auc": self.auc,
        }


@dataclass(frozen=True)
class EvalReport:
    classifier: str
    n_test: int
    precision_macro: float
    recall_macro: float
    accuracy: float
    roc_auc_macro_ovr: float
    confusion: Tuple[Tuple[int, ...], ...]
    per_class: Tuple[ClassReport, ...]

    def metrics(self) -> Dict[str, float]:
        return {
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "accuracy": self.accuracy,
            "roc_auc_macro_ovr": self.roc_auc_macro_ovr,
        }

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "n_test": self.n_test,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "accuracy": self.accuracy,
            "roc_auc_macro_ovr": self.roc_auc_macro_ovr,
            "per_class": [c.to_dict() for c in self.per_class],
            "confusion": {
                "labels": [c.label for c in self.per_class],
                "rows": [list(r) for r in self.confusion],
            },
        }


def evaluate(model, test: FeatureMatrix, n_classes: int = N_CLASSES) -> EvalReport:
    if test.x.shape[0] == 0:
        raise EmptyTest("no test rows to evaluate")
    proba = model.predict_proba(test.x)
    y_pred = np.argmax(proba, axis=1)
    cm = confusion_matrix(test.y, y_pred, n_classes)
    per_class = []
    for c in range(n_classes):
        pred_c = int(cm[:, c].sum())
        true_c = int(cm[c, :].sum())
        positive = test.y == c
        if positive.any() and not positive.all():
            class_auc: Optional[float] = auc_binary(proba[:, c], positive)
        else:
            class_auc = None
        per_class.append(
            ClassReport(
                label=LosCategory(c).label,
                support=true_c,
                precision=float(cm[c, c]) / pred_c if pred_c else 0.0,
                recall=float(cm[c, c]) / true_c if true_c else 0.0,
                auc=class_auc,
            )
        )
    return EvalReport(
        classifier=model.kind,
        n_test=int(test.x.shape[0]),
        precision_macro=macro_precision(cm),
        recall_macro=macro_recall(cm),
        accuracy=accuracy(cm),
        roc_auc_macro_ovr=macro_auc(test.y, proba, n_classes),
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
        per_class=tuple(per_class),
    )


def warmup() -> None:
    """Compile the Pegasos kernel ahead of any timed work."""
    x = np.asarray([[0.0, 1.0], [1.0, 0.0]])
    s = np.asarray([1.0, -1.0])
    perms = np.asarray([[0, 1]], dtype=np.int64)
    _pegasos(x, s, perms, 0.5)
