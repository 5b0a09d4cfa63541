import json

import numpy as np
import pytest

from phenomine.errors import (
    DegenerateConfig,
    DegenerateData,
    EmptyTest,
    NonFinite,
    WidthMismatch,
)
from phenomine.features import ColumnSpec, FeatureMatrix
from phenomine.learn import (
    ADABOOST_ROUNDS,
    CLASSIFIERS,
    KNN_K,
    MLR_L2,
    AdaBoostModel,
    accuracy,
    auc_binary,
    best_stump,
    confusion_matrix,
    evaluate,
    macro_auc,
    macro_precision,
    macro_recall,
    mlr_loss_grad,
    model_from_dict,
    predict,
    train,
)


def matrix_of(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return FeatureMatrix(
        encounter_ids=tuple(f"e{i:03d}" for i in range(len(y))),
        columns=tuple(ColumnSpec(f"diag_theta_{j}") for j in range(x.shape[1])),
        x=x,
        y=y,
        source="diag",
        mode="full",
        dropped_missing=0,
    )


def random_matrix(n, d, n_classes=5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    # cycle through the classes so each one is guaranteed rows
    y = np.arange(n) % n_classes
    return matrix_of(x, rng.permutation(y))


# ---------------------------------------------------------------------------
# k nearest neighbours
# ---------------------------------------------------------------------------


def test_knn_matches_brute_force_exactly():
    m = random_matrix(120, 4, seed=14)
    model = train("knn", m, seed=0)
    rng = np.random.default_rng(15)
    queries = rng.random((30, 4))
    got = model.predict_proba(queries)
    expected = np.zeros((30, 5))
    for i, q in enumerate(queries):
        dist = np.sqrt(((m.x - q) ** 2).sum(axis=1))
        for j in np.argsort(dist, kind="stable")[:KNN_K]:
            expected[i, m.y[j]] += 1.0
    assert np.array_equal(got, expected / KNN_K)


def test_knn_needs_enough_rows():
    with pytest.raises(DegenerateData):
        train("knn", matrix_of([[0.0], [1.0]], [0, 1]))


# ---------------------------------------------------------------------------
# logistic regression gradient
# ---------------------------------------------------------------------------


def test_mlr_gradient_matches_central_differences():
    rng = np.random.default_rng(21)
    n, d, k = 40, 4, 5
    xb = np.hstack([rng.random((n, d)), np.ones((n, 1))])
    y = rng.integers(0, k, size=n)
    w = rng.normal(size=(d + 1, k))
    loss, grad = mlr_loss_grad(w, xb, y, k, MLR_L2)
    assert np.isfinite(loss)

    h = 1e-6
    flat = [(i, j) for i in range(d + 1) for j in range(k)]
    picks = rng.choice(len(flat), size=20, replace=False)
    for p in picks:
        i, j = flat[p]
        wp, wm = w.copy(), w.copy()
        wp[i, j] += h
        wm[i, j] -= h
        lp, _ = mlr_loss_grad(wp, xb, y, k, MLR_L2)
        lm, _ = mlr_loss_grad(wm, xb, y, k, MLR_L2)
        fd = (lp - lm) / (2 * h)
        rel = abs(fd - grad[i, j]) / max(1.0, abs(grad[i, j]))
        assert rel <= 1e-5, f"coordinate ({i},{j}): fd={fd} grad={grad[i, j]}"


def test_mlr_training_improves_on_zero_weights():
    m = random_matrix(100, 3, seed=3)
    model = train("mlr", m, seed=0)
    xb = np.hstack([m.x, np.ones((m.x.shape[0], 1))])
    trained_loss, _ = mlr_loss_grad(model.w, xb, m.y, 5, MLR_L2)
    zero_loss, _ = mlr_loss_grad(np.zeros_like(model.w), xb, m.y, 5, MLR_L2)
    assert trained_loss < zero_loss
    assert model.iterations_run >= 1


# ---------------------------------------------------------------------------
# decision stumps and boosting
# ---------------------------------------------------------------------------


def stump_oracle(x, y, w, n_classes):
    """Literal scan over every feature and midpoint threshold."""
    best = None
    for f in range(x.shape[1]):
        values = np.unique(x[:, f])
        for a, b in zip(values, values[1:]):
            thr = 0.5 * (a + b)
            mask = x[:, f] <= thr
            left = np.zeros(n_classes)
            right = np.zeros(n_classes)
            np.add.at(left, y[mask], w[mask])
            np.add.at(right, y[~mask], w[~mask])
            err = (left.sum() - left.max()) + (right.sum() - right.max())
            cand = (float(err), f, float(thr), int(np.argmax(left)), int(np.argmax(right)))
            if best is None or err < best[0]:
                best = cand
    return best


def test_best_stump_matches_exhaustive_search():
    for trial in range(25):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(5, 20))
        d = int(rng.integers(1, 4))
        # coarse grid values force duplicate thresholds and ties
        x = rng.integers(0, 4, size=(n, d)).astype(np.float64)
        y = rng.integers(0, 3, size=n)
        # dyadic weights keep every partial sum exact, so tie-breaking
        # is bit-identical no matter the summation order
        w = rng.integers(1, 16, size=n) / 16.0
        got = best_stump(x, y, w, 3)
        expected = stump_oracle(x, y, w, 3)
        if expected is None:
            assert got is None
        else:
            assert got == expected, f"trial {trial}"


def test_best_stump_constant_features_give_none():
    x = np.ones((6, 2))
    y = np.array([0, 1, 0, 1, 0, 1])
    assert best_stump(x, y, np.full(6, 1 / 6), 2) is None


def test_adaboost_first_round_uses_uniform_weights():
    m = random_matrix(60, 3, n_classes=3, seed=8)
    model = train("adaboost", m, n_classes=3, seed=0)
    assert 1 <= len(model.stumps) <= ADABOOST_ROUNDS
    err_w, f, thr, left, right = best_stump(m.x, m.y, np.full(60, 1 / 60), 3)
    got = model.stumps[0]
    assert (got[0], got[1], got[2], got[3]) == (f, thr, left, right)
    expected_alpha = np.log((1 - err_w / 1.0) / (err_w / 1.0)) + np.log(3 - 1.0)
    assert got[4] == pytest.approx(expected_alpha, rel=1e-12)
    assert np.array_equal(model.priors, np.bincount(m.y, minlength=3) / 60)


def test_adaboost_separable_data_is_learned():
    x = np.vstack([np.zeros((10, 2)), np.ones((10, 2))])
    y = np.array([0] * 10 + [1] * 10)
    model = train("adaboost", matrix_of(x, y), n_classes=2, seed=0)
    assert np.array_equal(predict(model, x), y)


# ---------------------------------------------------------------------------
# svm and forest behaviour
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["svm", "rf"])
def test_proba_rows_are_distributions(name):
    m = random_matrix(80, 4, seed=31)
    model = train(name, m, seed=5)
    proba = model.predict_proba(m.x)
    assert proba.shape == (80, 5)
    assert np.all(np.isfinite(proba))
    assert np.all(proba >= 0)
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_rf_handles_heavily_duplicated_values():
    # integer-grid features make split midpoints collide with data values,
    # which must fall back to a leaf instead of an empty child
    rng = np.random.default_rng(44)
    x = rng.integers(0, 2, size=(60, 3)).astype(np.float64)
    y = rng.integers(0, 5, size=60)
    if np.unique(y).size < 2:
        y[0] = (y[1] + 1) % 5
    model = train("rf", matrix_of(x, y), seed=1)
    proba = model.predict_proba(x)
    assert np.all(np.isfinite(proba))
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_training_is_deterministic_by_seed():
    m = random_matrix(60, 3, seed=2)
    for name in ("svm", "rf"):
        a = train(name, m, seed=9).predict_proba(m.x)
        b = train(name, m, seed=9).predict_proba(m.x)
        c = train(name, m, seed=10).predict_proba(m.x)
        assert np.array_equal(a, b), name
        assert not np.array_equal(a, c), name


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def test_auc_matches_pairwise_concordance():
    for trial in range(10):
        rng = np.random.default_rng(200 + trial)
        n = int(rng.integers(6, 40))
        scores = np.round(rng.random(n), 1)  # coarse scores force ties
        positive = rng.random(n) < 0.4
        if positive.all() or not positive.any():
            positive[0] = not positive[0]
        got = auc_binary(scores, positive)
        pairs = 0.0
        n_pairs = 0
        for sp in scores[positive]:
            for sn in scores[~positive]:
                n_pairs += 1
                if sp > sn:
                    pairs += 1.0
                elif sp == sn:
                    pairs += 0.5
        assert abs(got - pairs / n_pairs) < 1e-9, f"trial {trial}"


def test_auc_edge_values():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    assert auc_binary(scores, np.array([True, True, False, False])) == 1.0
    assert auc_binary(scores, np.array([False, False, True, True])) == 0.0
    with pytest.raises(DegenerateData):
        auc_binary(scores, np.array([True, True, True, True]))


def test_macro_auc_skips_degenerate_classes():
    y = np.array([0, 0, 1, 1])
    proba = np.array([
        [0.9, 0.1, 0.0],
        [0.8, 0.2, 0.0],
        [0.3, 0.7, 0.0],
        [0.4, 0.6, 0.0],
    ])
    # class 2 never appears, so the mean covers classes 0 and 1 only
    expected = 0.5 * (auc_binary(proba[:, 0], y == 0) + auc_binary(proba[:, 1], y == 1))
    assert macro_auc(y, proba, 3) == pytest.approx(expected)
    assert macro_auc(np.zeros(4, dtype=int), proba, 3) == 0.5


def test_confusion_counts_and_macro_rates():
    y_true = np.array([0, 0, 1, 1, 1, 2])
    y_pred = np.array([0, 1, 1, 1, 0, 1])
    cm = confusion_matrix(y_true, y_pred, 4)
    assert cm[0].tolist() == [1, 1, 0, 0]
    assert cm[1].tolist() == [1, 2, 0, 0]
    assert cm[2].tolist() == [0, 1, 0, 0]
    assert cm.sum() == 6
    assert accuracy(cm) == pytest.approx(3 / 6)
    # precision: 1/2, 2/4, 0 (never predicted), 0 -> mean over 4 classes
    assert macro_precision(cm) == pytest.approx((0.5 + 0.5 + 0.0 + 0.0) / 4)
    # recall: 1/2, 2/3, 0/1, 0 (no rows)
    assert macro_recall(cm) == pytest.approx((0.5 + 2 / 3 + 0.0 + 0.0) / 4)


# ---------------------------------------------------------------------------
# evaluation reports
# ---------------------------------------------------------------------------


def test_evaluate_report_structure():
    m = random_matrix(50, 3, seed=6)
    test_rows = random_matrix(25, 3, seed=7)
    model = train("knn", m, seed=0)
    report = evaluate(model, test_rows)
    assert report.classifier == "knn"
    assert report.n_test == 25
    d = report.to_dict()
    assert list(d) == ["classifier", "n_test", "precision_macro", "recall_macro",
                       "accuracy", "roc_auc_macro_ovr", "per_class", "confusion"]
    assert len(d["per_class"]) == 5
    assert d["confusion"]["labels"] == ["VeryShort", "Short", "Medium", "Long",
                                        "VeryLong"]
    assert len(d["confusion"]["rows"]) == 5
    assert sum(sum(r) for r in d["confusion"]["rows"]) == 25
    assert sum(c["support"] for c in d["per_class"]) == 25


def test_evaluate_marks_missing_class_auc_none():
    m = random_matrix(50, 2, seed=9)
    model = train("knn", m, seed=0)
    test_rows = matrix_of(np.random.default_rng(1).random((8, 2)),
                          [0, 0, 1, 1, 1, 2, 2, 0])
    report = evaluate(model, test_rows)
    by_label = {c.label: c for c in report.per_class}
    assert by_label["Long"].auc is None and by_label["Long"].support == 0
    assert by_label["Short"].auc is not None


def test_evaluate_error_cases():
    m = random_matrix(30, 2, seed=12)
    model = train("knn", m, seed=0)
    empty = matrix_of(np.zeros((0, 2)), [])
    with pytest.raises(EmptyTest):
        evaluate(model, empty)
    wrong_width = random_matrix(10, 3, seed=13)
    with pytest.raises(WidthMismatch):
        evaluate(model, wrong_width)


# ---------------------------------------------------------------------------
# training guards and persistence
# ---------------------------------------------------------------------------


def test_train_input_validation():
    m = random_matrix(30, 2, seed=1)
    with pytest.raises(DegenerateConfig):
        train("xgboost", m)
    with pytest.raises(DegenerateData):
        train("knn", matrix_of(np.zeros((0, 2)), []))
    with pytest.raises(DegenerateData):
        train("knn", matrix_of(np.zeros((4, 1)), [0, 1, 2, 9]))
    with pytest.raises(DegenerateData):
        train("knn", matrix_of(np.zeros((4, 1)), [2, 2, 2, 2]))
    m.x[0, 0] = np.inf
    with pytest.raises(NonFinite):
        train("knn", m)


@pytest.mark.parametrize("name", CLASSIFIERS)
def test_models_round_trip_through_json(name):
    m = random_matrix(60, 3, seed=17)
    model = train(name, m, seed=4)
    payload = json.loads(json.dumps(model.to_dict()))
    again = model_from_dict(payload)
    assert again.kind == name
    assert np.array_equal(again.predict_proba(m.x), model.predict_proba(m.x))


def test_model_from_dict_rejects_unknown_kind():
    with pytest.raises(DegenerateConfig):
        model_from_dict({"kind": "perceptron"})


def test_predict_breaks_ties_toward_lower_class():
    flat = AdaBoostModel(stumps=(), priors=np.full(3, 1 / 3), n_features=2,
                         n_classes=3)
    assert predict(flat, np.zeros((4, 2))).tolist() == [0, 0, 0, 0]
