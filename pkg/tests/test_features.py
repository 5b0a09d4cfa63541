import numpy as np
import pytest

from phenomine.cohort import LosCategory
from phenomine.errors import (
    DegenerateConfig,
    DegenerateData,
    DimensionMismatch,
    EmptyIntersection,
    NonFinite,
    TooFewPerClass,
)
from phenomine.features import (
    ColumnSpec,
    FeatureMatrix,
    SmoteConfig,
    SplitSpec,
    assemble_features,
    matrix_from_csv_lines,
    matrix_to_csv_lines,
    select_source,
    smote,
    stratified_split,
)
from phenomine.topics import TopicAssignment


def assign(doc_id, theta):
    theta = tuple(theta)
    t = max(range(len(theta)), key=lambda i: theta[i])
    return TopicAssignment(doc_id=doc_id, dominant_topic=t,
                           contribution=theta[t], theta=theta)


def three_way_inputs():
    diag = {e: assign(e, th) for e, th in [
        ("e1", (0.7, 0.2, 0.1)),
        ("e2", (0.1, 0.8, 0.1)),
        ("e3", (0.2, 0.2, 0.6)),
        ("only-diag", (0.9, 0.05, 0.05)),
    ]}
    proc = {e: assign(e, th) for e, th in [
        ("e1", (0.6, 0.4)),
        ("e2", (0.3, 0.7)),
        ("e3", (0.5, 0.5)),
        ("only-proc", (0.2, 0.8)),
    ]}
    labels = {"e1": LosCategory.SHORT, "e2": LosCategory.LONG,
              "e3": LosCategory.SHORT, "only-label": LosCategory.MEDIUM}
    return diag, proc, labels


def toy_matrix(y, n_cols=2, seed=0):
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    return FeatureMatrix(
        encounter_ids=tuple(f"e{i:03d}" for i in range(len(y))),
        columns=tuple(ColumnSpec(f"diag_theta_{j}") for j in range(n_cols)),
        x=rng.random((len(y), n_cols)),
        y=y,
        source="diag",
        mode="full",
        dropped_missing=0,
    )


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def test_assemble_dominant_joins_on_encounter_id():
    diag, proc, labels = three_way_inputs()
    m = assemble_features(diag, proc, labels, mode="dominant")
    assert m.encounter_ids == ("e1", "e2", "e3")
    assert [c.name for c in m.columns] == [
        "diag_topic", "diag_contribution", "proc_topic", "proc_contribution",
    ]
    assert m.columns[0].topic_count == 3
    assert m.columns[2].topic_count == 2
    assert not m.columns[1].is_topic_id
    expected = np.array([
        [0.0, 0.7, 0.0, 0.6],
        [1.0, 0.8, 1.0, 0.7],
        [2.0, 0.6, 0.0, 0.5],
    ])
    assert np.array_equal(m.x, expected)
    assert m.y.tolist() == [int(LosCategory.SHORT), int(LosCategory.LONG),
                            int(LosCategory.SHORT)]
    # only-diag, only-proc and only-label each miss two of the three maps
    assert m.dropped_missing == 3
    assert m.source == "both" and m.mode == "dominant"


def test_assemble_full_concatenates_theta_rows():
    diag, proc, labels = three_way_inputs()
    m = assemble_features(diag, proc, labels, mode="full")
    assert [c.name for c in m.columns] == [
        "diag_theta_0", "diag_theta_1", "diag_theta_2",
        "proc_theta_0", "proc_theta_1",
    ]
    assert all(c.topic_count is None for c in m.columns)
    assert np.array_equal(m.x[0], np.array([0.7, 0.2, 0.1, 0.6, 0.4]))


def test_assemble_rejects_bad_inputs():
    diag, proc, labels = three_way_inputs()
    with pytest.raises(DegenerateConfig):
        assemble_features(diag, proc, labels, mode="pca")
    with pytest.raises(EmptyIntersection):
        assemble_features({}, proc, labels)
    with pytest.raises(EmptyIntersection):
        assemble_features({"x": diag["e1"]}, {"y": proc["e1"]}, labels)


def test_select_source_keeps_matching_columns():
    diag, proc, labels = three_way_inputs()
    m = assemble_features(diag, proc, labels, mode="dominant")
    d = select_source(m, "diag")
    assert [c.name for c in d.columns] == ["diag_topic", "diag_contribution"]
    assert np.array_equal(d.x, m.x[:, :2])
    assert d.encounter_ids == m.encounter_ids
    assert d.source == "diag"
    p = select_source(m, "proc")
    assert np.array_equal(p.x, m.x[:, 2:])
    assert select_source(m, "both") is m
    with pytest.raises(DegenerateConfig):
        select_source(m, "notes")
    with pytest.raises(DegenerateConfig):
        select_source(d, "proc")


def test_matrix_invariants_checked_on_construction():
    good = toy_matrix([0, 1])
    with pytest.raises(DimensionMismatch):
        FeatureMatrix(encounter_ids=good.encounter_ids[:1], columns=good.columns,
                      x=good.x, y=good.y, source="diag", mode="full",
                      dropped_missing=0)
    with pytest.raises(DimensionMismatch):
        FeatureMatrix(encounter_ids=good.encounter_ids, columns=good.columns[:1],
                      x=good.x, y=good.y, source="diag", mode="full",
                      dropped_missing=0)
    bad = good.x.copy()
    bad[0, 0] = np.nan
    with pytest.raises(NonFinite):
        FeatureMatrix(encounter_ids=good.encounter_ids, columns=good.columns,
                      x=bad, y=good.y, source="diag", mode="full",
                      dropped_missing=0)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def test_split_sends_rounded_fraction_per_class():
    m = toy_matrix([0] * 60 + [1] * 40)
    train, test = stratified_split(m, SplitSpec(train_fraction=0.7, seed=3))
    assert (train.y == 0).sum() == 42 and (train.y == 1).sum() == 28
    assert (test.y == 0).sum() == 18 and (test.y == 1).sum() == 12
    # disjoint partition of the original rows
    assert set(train.encounter_ids) | set(test.encounter_ids) == set(m.encounter_ids)
    assert not set(train.encounter_ids) & set(test.encounter_ids)
    # row order inside each side follows the original matrix
    assert list(train.encounter_ids) == sorted(train.encounter_ids)


def test_split_is_deterministic_and_seed_sensitive():
    m = toy_matrix([0] * 20 + [1] * 20)
    a = stratified_split(m, SplitSpec(seed=7))
    b = stratified_split(m, SplitSpec(seed=7))
    c = stratified_split(m, SplitSpec(seed=8))
    assert a[0].encounter_ids == b[0].encounter_ids
    assert a[1].encounter_ids == b[1].encounter_ids
    assert a[0].encounter_ids != c[0].encounter_ids


def test_split_clamps_so_both_sides_keep_each_class():
    m = toy_matrix([0, 0, 1, 1])
    train, test = stratified_split(m, SplitSpec(train_fraction=0.9, seed=0))
    for side in (train, test):
        assert sorted(np.unique(side.y)) == [0, 1]


def test_split_unstratified_cuts_globally():
    m = toy_matrix([0] * 97 + [1] * 3)
    train, test = stratified_split(
        m, SplitSpec(train_fraction=0.7, seed=1, stratified=False))
    assert len(train.y) == 70 and len(test.y) == 30


def test_split_error_cases():
    with pytest.raises(TooFewPerClass):
        stratified_split(toy_matrix([0, 0, 1]), SplitSpec(seed=0))
    with pytest.raises(DegenerateData):
        stratified_split(toy_matrix([0]), SplitSpec(seed=0, stratified=False))
    with pytest.raises(DegenerateConfig):
        SplitSpec(train_fraction=1.0).validate()
    with pytest.raises(DegenerateConfig):
        SplitSpec(train_fraction=0.0).validate()
    SplitSpec(train_fraction=0.5).validate()


# ---------------------------------------------------------------------------
# oversampling
# ---------------------------------------------------------------------------


def test_smote_balanced_input_is_returned_untouched():
    m = toy_matrix([0, 0, 1, 1])
    out, records = smote(m, SmoteConfig(seed=0))
    assert out is m
    assert records == []


def test_smote_flattens_histogram_and_tags_synthetics():
    m = toy_matrix([0] * 8 + [1] * 3 + [3] * 5, n_cols=3, seed=2)
    out, _ = smote(m, SmoteConfig(seed=4))
    classes, counts = np.unique(out.y, return_counts=True)
    assert classes.tolist() == [0, 1, 3]
    assert counts.tolist() == [8, 8, 8]
    n = len(m.y)
    assert out.encounter_ids[:n] == m.encounter_ids
    assert np.array_equal(out.x[:n], m.x)
    assert np.array_equal(out.y[:n], m.y)
    added = out.encounter_ids[n:]
    assert set(added) == {f"syn-1-{i}" for i in range(5)} | {f"syn-3-{i}" for i in range(3)}


def test_smote_synthetics_interpolate_their_parents():
    m = toy_matrix([0] * 10 + [2] * 4, n_cols=3, seed=5)
    out, records = smote(m, SmoteConfig(seed=11, k_neighbors=2), debug=True)
    assert len(records) == 6
    for rec in records:
        assert rec.label == 2
        assert m.y[rec.parent_a] == 2 and m.y[rec.parent_b] == 2
        assert 0.0 <= rec.u <= 1.0
        expected = m.x[rec.parent_a] + rec.u * (m.x[rec.parent_b] - m.x[rec.parent_a])
        assert np.array_equal(np.asarray(rec.raw), expected)
        lo = np.minimum(m.x[rec.parent_a], m.x[rec.parent_b])
        hi = np.maximum(m.x[rec.parent_a], m.x[rec.parent_b])
        assert np.all(np.asarray(rec.raw) >= lo) and np.all(np.asarray(rec.raw) <= hi)
        # no topic-id columns here, so the stored row equals the raw one
        assert np.array_equal(out.x[rec.row_index], np.asarray(rec.raw))


def test_smote_rounds_and_clamps_topic_ids():
    cols = (ColumnSpec("diag_topic", topic_count=4), ColumnSpec("diag_contribution"))
    x = np.array([[0.0, 0.9], [3.0, 0.8], [1.0, 0.7],
                  [2.0, 0.6], [2.0, 0.5], [0.0, 0.4]])
    m = FeatureMatrix(encounter_ids=tuple(f"e{i}" for i in range(6)), columns=cols,
                      x=x, y=np.array([0, 0, 0, 0, 1, 1]), source="diag",
                      mode="dominant", dropped_missing=0)
    out, records = smote(m, SmoteConfig(seed=3), debug=True)
    assert len(records) == 2
    for rec in records:
        stored = out.x[rec.row_index]
        assert stored[0] == float(int(stored[0]))
        assert 0 <= stored[0] <= 3
        assert stored[0] == min(max(round(rec.raw[0]), 0), 3)
        assert stored[1] == rec.raw[1]


def test_smote_caps_neighbours_at_class_size():
    # the two-row class can only ever pick the other row as a parent
    m = toy_matrix([0] * 6 + [1] * 2, seed=7)
    out, records = smote(m, SmoteConfig(seed=9, k_neighbors=5), debug=True)
    assert sorted(np.unique(out.y).tolist()) == [0, 1]
    assert (out.y == 1).sum() == 6
    members = np.flatnonzero(m.y == 1)
    for rec in records:
        assert {rec.parent_a, rec.parent_b} == set(members.tolist())


def test_smote_deterministic_by_seed():
    m = toy_matrix([0] * 9 + [1] * 4, seed=1)
    a, _ = smote(m, SmoteConfig(seed=2))
    b, _ = smote(m, SmoteConfig(seed=2))
    c, _ = smote(m, SmoteConfig(seed=3))
    assert np.array_equal(a.x, b.x) and a.encounter_ids == b.encounter_ids
    assert not np.array_equal(a.x, c.x)


def test_smote_error_cases():
    with pytest.raises(TooFewPerClass):
        smote(toy_matrix([0, 0, 0, 1]), SmoteConfig(seed=0))
    with pytest.raises(DegenerateConfig):
        SmoteConfig(k_neighbors=0).validate()


# ---------------------------------------------------------------------------
# csv round trip
# ---------------------------------------------------------------------------


def test_matrix_round_trips_through_csv():
    diag, proc, labels = three_way_inputs()
    m = assemble_features(diag, proc, labels, mode="dominant")
    lines = matrix_to_csv_lines(m)
    assert lines[0] == ("encounter_id,diag_topic,diag_contribution,"
                        "proc_topic,proc_contribution,label")
    # topic ids serialize as bare integers, labels by name
    assert lines[1].startswith("e1,0,") and lines[1].endswith(",Short")

    back = matrix_from_csv_lines(lines, source="both", mode="dominant",
                                 topic_counts={"diag_topic": 3, "proc_topic": 2})
    assert back.encounter_ids == m.encounter_ids
    assert np.array_equal(back.x, m.x)
    assert np.array_equal(back.y, m.y)
    assert [c.topic_count for c in back.columns] == [3, None, 2, None]


def test_matrix_from_csv_rejects_malformed_tables():
    with pytest.raises(DegenerateData):
        matrix_from_csv_lines([], source="both", mode="full", topic_counts={})
    with pytest.raises(DegenerateData):
        matrix_from_csv_lines(["id,a,b"], source="both", mode="full", topic_counts={})
    good = ["encounter_id,a,label", "e1,0.5,Short"]
    matrix_from_csv_lines(good, source="both", mode="full", topic_counts={})
    with pytest.raises(DegenerateData):
        matrix_from_csv_lines(good + ["e2,0.5"], source="both", mode="full",
                              topic_counts={})
