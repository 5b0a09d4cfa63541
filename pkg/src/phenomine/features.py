"""Feature assembly for the stay-length classifiers.

Rows are encounters that carry a stay-length label plus topic output
from both note sources. The matrix is always assembled combined;
single-source variants are column selections of it, so every variant
shares one row set and one train/test split. Two shapes:

* dominant: four columns [diag_topic, diag_contribution, proc_topic,
  proc_contribution]. Topic ids are categorical integers, which
  matters downstream (the oversampler must round and clamp them after
  interpolating).
* full: the complete theta row per source, one column per topic.

Labels are stay-length category codes 0..4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cohort import LosCategory
from .errors import (
    DegenerateConfig,
    DegenerateData,
    DimensionMismatch,
    EmptyIntersection,
    NonFinite,
    TooFewPerClass,
)
from .topics import TopicAssignment

FEATURE_SOURCES = ("diag", "proc", "both")
FEATURE_MODES = ("dominant", "full")


@dataclass(frozen=True)
class ColumnSpec:
    """Name plus, for topic-id columns, the valid id range."""

    name: str
    topic_count: Optional[int] = None  # None for plain numeric columns

    @property
    def is_topic_id(self) -> bool:
        return self.topic_count is not None


@dataclass(frozen=True)
class FeatureMatrix:
    encounter_ids: Tuple[str, ...]
    columns: Tuple[ColumnSpec, ...]
    x: np.ndarray
    y: np.ndarray
    source: str
    mode: str
    dropped_missing: int

    def __post_init__(self):
        if self.x.shape[0] != len(self.encounter_ids) or self.x.shape[0] != len(self.y):
            raise DimensionMismatch(
                f"feature matrix rows {self.x.shape[0]} != ids {len(self.encounter_ids)} / labels {len(self.y)}"
            )
        if self.x.shape[1] != len(self.columns):
            raise DimensionMismatch(
                f"feature matrix columns {self.x.shape[1]} != specs {len(self.columns)}"
            )
        if not np.all(np.isfinite(self.x)):
            raise NonFinite("feature matrix contains non-finite values")


def _combined_columns(mode: str, k_diag: int, k_proc: int) -> Tuple[ColumnSpec, ...]:
    if mode == "dominant":
        return (
            ColumnSpec("diag_topic", topic_count=k_diag),
            ColumnSpec("diag_contribution"),
            ColumnSpec("proc_topic", topic_count=k_proc),
            ColumnSpec("proc_contribution"),
        )
    cols = [ColumnSpec(f"diag_theta_{t}") for t in range(k_diag)]
    cols.extend(ColumnSpec(f"proc_theta_{t}") for t in range(k_proc))
    return tuple(cols)


def assemble_features(
    diag_assignments: Dict[str, TopicAssignment],
    proc_assignments: Dict[str, TopicAssignment],
    los_labels: Dict[str, LosCategory],
    mode: str = "dominant",
) -> FeatureMatrix:
    """Join the two per-source topic outputs with labels on encounter id.

    Only encounters present in all three maps become rows, ordered by
    encounter id; the rest are dropped and counted. An empty join is an
    error rather than an empty matrix.
    """
    if mode not in FEATURE_MODES:
        raise DegenerateConfig(f"unknown feature mode {mode!r}")
    if not diag_assignments or not proc_assignments:
        raise EmptyIntersection("both topic sources must have at least one assignment")
    k_diag = len(next(iter(diag_assignments.values())).theta)
    k_proc = len(next(iter(proc_assignments.values())).theta)

    ids: List[str] = []
    rows: List[List[float]] = []
    y: List[int] = []
    universe = set(los_labels) | set(diag_assignments) | set(proc_assignments)
    dropped = 0
    for enc_id in sorted(universe):
        da = diag_assignments.get(enc_id)
        pa = proc_assignments.get(enc_id)
        label = los_labels.get(enc_id)
        if da is None or pa is None or label is None:
            dropped += 1
            continue
        if mode == "dominant":
            row = [
                float(da.dominant_topic),
                float(da.contribution),
                float(pa.dominant_topic),
                float(pa.contribution),
            ]
        else:
            row = list(da.theta) + list(pa.theta)
        ids.append(enc_id)
        rows.append(row)
        y.append(int(label))
    if not ids:
        raise EmptyIntersection("no encounter has labels plus both topic sources")
    return FeatureMatrix(
        encounter_ids=tuple(ids),
        columns=_combined_columns(mode, k_diag, k_proc),
        x=np.asarray(rows, dtype=np.float64),
        y=np.asarray(y, dtype=np.int64),
        source="both",
        mode=mode,
        dropped_missing=dropped,
    )


def select_source(matrix: FeatureMatrix, source: str) -> FeatureMatrix:
    """Narrow a combined matrix to one source by keeping its columns."""
    if source not in FEATURE_SOURCES:
        raise DegenerateConfig(f"unknown feature source {source!r}")
    if source == "both":
        return matrix
    if matrix.source != "both":
        raise DegenerateConfig(f"cannot take {source!r} columns from a {matrix.source!r} matrix")
    keep = [i for i, c in enumerate(matrix.columns) if c.name.startswith(source + "_")]
    return FeatureMatrix(
        encounter_ids=matrix.encounter_ids,
        columns=tuple(matrix.columns[i] for i in keep),
        x=matrix.x[:, keep],
        y=matrix.y,
        source=source,
        mode=matrix.mode,
        dropped_missing=matrix.dropped_missing,
    )


@dataclass(frozen=True)
class SplitSpec:
    """How to carve train and test partitions."""

    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def validate(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise DegenerateConfig(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


def _take(matrix: FeatureMatrix, indices: List[int]) -> FeatureMatrix:
    return FeatureMatrix(
        encounter_ids=tuple(matrix.encounter_ids[i] for i in indices),
        columns=matrix.columns,
        x=matrix.x[indices],
        y=matrix.y[indices],
        source=matrix.source,
        mode=matrix.mode,
        dropped_missing=matrix.dropped_missing,
    )


def stratified_split(
    matrix: FeatureMatrix, spec: SplitSpec
) -> Tuple[FeatureMatrix, FeatureMatrix]:
    """Seeded shuffle and carve-off of the training fraction.

    Stratified (the default): each class sends round(fraction * n_c)
    rows to the train side, clamped so both sides keep at least one row
    of the class; a single-row class cannot satisfy that and is an
    error. Unstratified: one global shuffle and cut.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = len(matrix.encounter_ids)
    if n < 2:
        raise DegenerateData("need at least two rows to split")
    train_idx: List[int] = []
    test_idx: List[int] = []
    if spec.stratified:
        for c in np.unique(matrix.y):
            members = np.flatnonzero(matrix.y == c)
            n_c = members.size
            if n_c < 2:
                raise TooFewPerClass(
                    f"class {int(c)} has {n_c} row(s); need at least 2 to split"
                )
            n_train = int(round(n_c * spec.train_fraction))
            n_train = max(1, min(n_train, n_c - 1))
            shuffled = members[rng.permutation(n_c)]
            train_idx.extend(int(i) for i in shuffled[:n_train])
            test_idx.extend(int(i) for i in shuffled[n_train:])
    else:
        n_train = int(round(n * spec.train_fraction))
        n_train = max(1, min(n_train, n - 1))
        shuffled = rng.permutation(n)
        train_idx.extend(int(i) for i in shuffled[:n_train])
        test_idx.extend(int(i) for i in shuffled[n_train:])
    train_idx.sort()
    test_idx.sort()
    return _take(matrix, train_idx), _take(matrix, test_idx)


@dataclass(frozen=True)
class SmoteConfig:
    """Oversampling knobs; the target is always the majority count."""

    k_neighbors: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.k_neighbors < 1:
            raise DegenerateConfig(f"k_neighbors must be >= 1, got {self.k_neighbors}")


@dataclass(frozen=True)
class SmoteRecord:
    """Provenance of one synthetic row, kept only in debug mode.

    raw is the interpolated row before topic-id rounding, so the
    between-parents property can be checked coordinate by coordinate.
    """

    row_index: int
    label: int
    parent_a: int  # indices into the input matrix
    parent_b: int
    u: float
    raw: Tuple[float, ...] = field(default=())


def smote(
    matrix: FeatureMatrix,
    config: SmoteConfig,
    debug: bool = False,
) -> Tuple[FeatureMatrix, List[SmoteRecord]]:
    """Equalize class sizes by interpolated oversampling.

    Every minority class is topped up to the majority count with rows
    x + u * (x' - x), u uniform on [0, 1], x' one of the k nearest
    same-class neighbours by Euclidean distance (k capped at
    class_count - 1). Topic-id columns are rounded to the nearest id
    and clamped into range afterwards, since fractional ids mean
    nothing. Synthetic rows get ids "syn-<label>-<n>" and original
    rows are never touched.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    classes, counts = np.unique(matrix.y, return_counts=True)
    majority = int(counts.max())
    new_rows: List[np.ndarray] = []
    new_ids: List[str] = []
    new_y: List[int] = []
    records: List[SmoteRecord] = []
    topic_cols = [i for i, c in enumerate(matrix.columns) if c.is_topic_id]
    for c, n_c in zip(classes, counts):
        deficit = majority - int(n_c)
        if deficit == 0:
            continue
        if n_c < 2:
            raise TooFewPerClass(
                f"class {int(c)} has {int(n_c)} row(s); need at least 2 to oversample"
            )
        members = np.flatnonzero(matrix.y == c)
        pts = matrix.x[members]
        k_eff = min(config.k_neighbors, int(n_c) - 1)
        # pairwise distances within the class; self excluded via +inf
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        neighbour_ids = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
        for n in range(deficit):
            a = int(rng.integers(0, int(n_c)))
            b = int(neighbour_ids[a, int(rng.integers(0, k_eff))])
            u = float(rng.random())
            row = pts[a] + u * (pts[b] - pts[a])
            raw = tuple(float(v) for v in row) if debug else ()
            for i in topic_cols:
                hi = matrix.columns[i].topic_count - 1
                row[i] = min(max(round(row[i]), 0), hi)
            new_rows.append(row)
            new_ids.append(f"syn-{int(c)}-{n}")
            new_y.append(int(c))
            if debug:
                records.append(
                    SmoteRecord(
                        row_index=len(matrix.encounter_ids) + len(new_rows) - 1,
                        label=int(c),
                        parent_a=int(members[a]),
                        parent_b=int(members[b]),
                        u=u,
                        raw=raw,
                    )
                )
    if not new_rows:
        return matrix, records
    out = FeatureMatrix(
        encounter_ids=matrix.encounter_ids + tuple(new_ids),
        columns=matrix.columns,
        x=np.vstack([matrix.x, np.asarray(new_rows)]),
        y=np.concatenate([matrix.y, np.asarray(new_y, dtype=np.int64)]),
        source=matrix.source,
        mode=matrix.mode,
        dropped_missing=matrix.dropped_missing,
    )
    return out, records


def matrix_to_csv_lines(matrix: FeatureMatrix) -> List[str]:
    """Rows as encounter_id,<features...>,label with category names."""
    header = "encounter_id," + ",".join(c.name for c in matrix.columns) + ",label"
    lines = [header]
    for enc_id, row, label in zip(matrix.encounter_ids, matrix.x, matrix.y):
        cells = []
        for value, col in zip(row, matrix.columns):
            if col.is_topic_id:
                cells.append(str(int(value)))
            else:
                cells.append(repr(float(value)))
        lines.append(f"{enc_id}," + ",".join(cells) + f",{LosCategory(int(label)).label}")
    return lines


def matrix_from_csv_lines(
    lines: Sequence[str],
    source: str,
    mode: str,
    topic_counts: Dict[str, int],
) -> FeatureMatrix:
    """Inverse of matrix_to_csv_lines; topic_counts maps topic-id column names to k."""
    from .cohort import category_from_label

    if not lines:
        raise DegenerateData("empty feature table")
    header = lines[0].split(",")
    if header[0] != "encounter_id" or header[-1] != "label":
        raise DegenerateData(f"bad feature header: {lines[0]!r}")
    names = header[1:-1]
    cols = tuple(ColumnSpec(n, topic_count=topic_counts.get(n)) for n in names)
    ids, rows, y = [], [], []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise DegenerateData(f"feature row width {len(parts)} != header {len(header)}")
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:-1]])
        y.append(int(category_from_label(parts[-1])))
    return FeatureMatrix(
        encounter_ids=tuple(ids),
        columns=cols,
        x=np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, len(cols))),
        y=np.asarray(y, dtype=np.int64),
        source=source,
        mode=mode,
        dropped_missing=0,
    )
