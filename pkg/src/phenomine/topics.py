"""Topic model: weighted collapsed Gibbs LDA, coherence, model files.

fit_lda runs a collapsed Gibbs sampler where each (document, term)
entry carries a weight; counts accumulate weights, so bag-of-words is
the integer special case. Reported phi and theta are posterior means
averaged over every sweep after burn-in:

    phi[k,w]   = (n_kw + beta) / (n_k + V*beta)
    theta[d,k] = (n_dk + alpha) / (n_d + K*alpha)

Defaults follow the usual collapsed-sampler heuristics: alpha = 50/K,
beta = 0.01, 1000 sweeps with 800 burn-in.

Two coherence measures are provided. The document-count measure scores
each topic by sum over ordered top-term pairs of
ln((D(wi,wj)+1)/D(wj)); the sliding-window measure builds NPMI vectors
from boolean windows (width 110) and averages the cosine of each
top-term vector against the vector of the whole set.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import _gibbs
from .errors import (
    DegenerateConfig,
    EmptyCorpus,
    MissingArtifact,
    NonFinite,
    SchemaError,
    UnknownPatient,
    VocabMismatch,
)
from .textprep import EncounterDocument
from .vectorize import DocVector, Vocabulary

MODEL_MAGIC = "LDA-MODEL v1"


@dataclass(frozen=True)
class LdaConfig:
    """Sampler settings. alpha=None resolves to 50/k at fit time."""

    k: int
    alpha: Optional[float] = None
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 800
    seed: int = 0

    def resolved_alpha(self) -> float:
        return 50.0 / self.k if self.alpha is None else self.alpha

    def validate(self) -> None:
        if self.k < 1:
            raise DegenerateConfig(f"k must be >= 1, got {self.k}")
        if self.resolved_alpha() <= 0:
            raise DegenerateConfig(f"alpha must be positive, got {self.alpha}")
        if self.beta <= 0:
            raise DegenerateConfig(f"beta must be positive, got {self.beta}")
        if self.iterations < 1:
            raise DegenerateConfig(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise DegenerateConfig(
                f"burn_in must satisfy 0 <= burn_in < iterations, got {self.burn_in}/{self.iterations}"
            )


@dataclass(frozen=True)
class TopicModel:
    """Fitted model: posterior-mean phi and theta plus identifying data."""

    config: LdaConfig
    terms: Tuple[str, ...]
    vocab_digest: str
    doc_ids: Tuple[str, ...]
    phi: np.ndarray    # k x V
    theta: np.ndarray  # D x k

    def k(self) -> int:
        return self.config.k

    def check_invariants(self, tol: float = 1e-9) -> None:
        if np.any(self.phi <= 0) or np.any(self.theta <= 0):
            raise NonFinite("phi and theta entries must be strictly positive")
        if not np.allclose(self.phi.sum(axis=1), 1.0, atol=tol):
            raise NonFinite("phi rows must sum to 1")
        if not np.allclose(self.theta.sum(axis=1), 1.0, atol=tol):
            raise NonFinite("theta rows must sum to 1")


@dataclass(frozen=True)
class TopicAssignment:
    """Dominant-topic label for one document."""

    doc_id: str
    dominant_topic: int
    contribution: float
    theta: Tuple[float, ...]


def _entry_arrays(vectors: Sequence[DocVector], vocab_size: int):
    docs, terms, weights = [], [], []
    for d, vec in enumerate(vectors):
        if not vec.entries:
            raise EmptyCorpus(f"document {vec.doc_id!r} has no terms")
        for term_id, w in vec.entries:
            if not 0 <= term_id < vocab_size:
                raise VocabMismatch(
                    f"document {vec.doc_id!r}: term id {term_id} outside vocabulary ({vocab_size})"
                )
            if not math.isfinite(w) or w <= 0:
                raise NonFinite(f"document {vec.doc_id!r}: bad weight {w!r} for term {term_id}")
            docs.append(d)
            terms.append(term_id)
            weights.append(w)
    return (
        np.asarray(docs, dtype=np.int64),
        np.asarray(terms, dtype=np.int64),
        np.asarray(weights, dtype=np.float64),
    )


def fit_lda(vectors: Sequence[DocVector], vocab: Vocabulary, config: LdaConfig) -> TopicModel:
    """Fit by collapsed Gibbs sampling. Deterministic in (data, config, seed)."""
    config.validate()
    if not vectors:
        raise EmptyCorpus("no documents to fit")
    doc_ids, term_ids, weights = _entry_arrays(vectors, len(vocab))
    phi, theta = _gibbs.run_gibbs(
        doc_ids, term_ids, weights,
        len(vectors), len(vocab), config.k,
        config.resolved_alpha(), config.beta,
        config.iterations, config.burn_in,
        config.seed & 0x7FFFFFFF,
    )
    model = TopicModel(
        config=config,
        terms=vocab.terms,
        vocab_digest=vocab.digest(),
        doc_ids=tuple(v.doc_id for v in vectors),
        phi=phi,
        theta=theta,
    )
    model.check_invariants()
    return model


def _foldin_seed(model: TopicModel, doc_id: str) -> int:
    h = hashlib.sha256(f"{model.config.seed}:foldin:{doc_id}".encode("utf-8")).digest()
    return int.from_bytes(h[:4], "big") & 0x7FFFFFFF


def infer_theta(model: TopicModel, vector: DocVector, sweeps: int = 100,
                seed: Optional[int] = None) -> np.ndarray:
    """Fold a new document in with phi held fixed; returns its theta row.

    An empty document gets the uniform vector.
    """
    k = model.k()
    if sweeps < 1:
        raise DegenerateConfig(f"sweeps must be >= 1, got {sweeps}")
    if not vector.entries:
        return np.full(k, 1.0 / k)
    term_ids = np.asarray([t for t, _ in vector.entries], dtype=np.int64)
    weights = np.asarray([w for _, w in vector.entries], dtype=np.float64)
    if term_ids.max() >= len(model.terms) or term_ids.min() < 0:
        raise VocabMismatch(
            f"document {vector.doc_id!r} references terms outside the model vocabulary"
        )
    if seed is None:
        seed = _foldin_seed(model, vector.doc_id)
    theta = _gibbs.run_foldin(
        term_ids, weights, model.phi, model.config.resolved_alpha(),
        sweeps, seed & 0x7FFFFFFF,
    )
    return theta


def dominant_topic(theta_row: np.ndarray) -> Tuple[int, float]:
    """Index and share of the largest theta entry; first index wins ties."""
    t = int(np.argmax(theta_row))
    return t, float(theta_row[t])


def assignments_from_model(model: TopicModel) -> List[TopicAssignment]:
    out = []
    for doc_id, row in zip(model.doc_ids, model.theta):
        t, c = dominant_topic(row)
        out.append(TopicAssignment(doc_id=doc_id, dominant_topic=t, contribution=c,
                                   theta=tuple(float(x) for x in row)))
    return out


def top_keywords(model: TopicModel, topic: int, n: int = 10) -> List[Tuple[str, float]]:
    """Top-n terms by probability; equal probabilities order lexicographically."""
    if not 0 <= topic < model.k():
        raise DegenerateConfig(f"topic {topic} out of range for k={model.k()}")
    row = model.phi[topic]
    order = sorted(range(len(row)), key=lambda w: (-row[w], model.terms[w]))
    return [(model.terms[w], float(row[w])) for w in order[: min(n, len(row))]]


def representative_docs(model: TopicModel, topic: int,
                        threshold: float = 0.80) -> List[Tuple[str, float]]:
    """Documents whose dominant topic is `topic` with contribution >= threshold."""
    if not 0 <= topic < model.k():
        raise DegenerateConfig(f"topic {topic} out of range for k={model.k()}")
    rows = []
    for doc_id, row in zip(model.doc_ids, model.theta):
        t, c = dominant_topic(row)
        if t == topic and c >= threshold:
            rows.append((doc_id, c))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------


def save_model(model: TopicModel, path: str) -> None:
    """Versioned text format, stable byte-for-byte for a given model."""
    cfg = model.config
    lines = [
        f"{MODEL_MAGIC} k={cfg.k} v={len(model.terms)} alpha={cfg.resolved_alpha()!r} "
        f"beta={cfg.beta!r} seed={cfg.seed} vocab={model.vocab_digest}"
    ]
    for t in range(cfg.k):
        for w in range(len(model.terms)):
            lines.append(f"phi\t{t}\t{model.terms[w]}\t{float(model.phi[t, w])!r}")
    order = sorted(range(len(model.doc_ids)), key=lambda i: model.doc_ids[i])
    for i in order:
        row = ",".join(repr(float(x)) for x in model.theta[i])
        lines.append(f"theta\t{model.doc_ids[i]}\t{row}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> TopicModel:
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise MissingArtifact(
            f"missing model file {path}; run fit-topics first"
        ) from None
    with fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(MODEL_MAGIC + " "):
            raise SchemaError(f"{path}: not a model file (header {header[:40]!r})")
        fields = dict(part.split("=", 1) for part in header[len(MODEL_MAGIC) + 1:].split())
        try:
            k = int(fields["k"])
            v = int(fields["v"])
            alpha = float(fields["alpha"])
            beta = float(fields["beta"])
            seed = int(fields["seed"])
            digest = fields["vocab"]
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"{path}: bad header fields: {exc}") from None
        terms: List[str] = []
        phi = np.zeros((k, v))
        theta_rows: List[Tuple[str, List[float]]] = []
        phi_seen = 0
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "phi":
                if len(parts) != 4:
                    raise SchemaError(f"{path}:{line_no}: bad phi row")
                t, term, prob = int(parts[1]), parts[2], float(parts[3])
                w = phi_seen % v
                if t == 0:
                    terms.append(term)
                elif terms[w] != term:
                    raise SchemaError(f"{path}:{line_no}: term order mismatch at {term!r}")
                phi[t, w] = prob
                phi_seen += 1
            elif parts[0] == "theta":
                if len(parts) != 3:
                    raise SchemaError(f"{path}:{line_no}: bad theta row")
                theta_rows.append((parts[1], [float(x) for x in parts[2].split(",")]))
            else:
                raise SchemaError(f"{path}:{line_no}: unknown row kind {parts[0]!r}")
        if phi_seen != k * v:
            raise SchemaError(f"{path}: expected {k * v} phi rows, found {phi_seen}")
    check = hashlib.sha256()
    for t in terms:
        check.update(t.encode("utf-8"))
        check.update(b"\x00")
    if check.hexdigest()[:16] != digest:
        raise VocabMismatch(f"{path}: vocabulary digest mismatch")
    theta = np.asarray([row for _, row in theta_rows]) if theta_rows else np.zeros((0, k))
    model = TopicModel(
        config=LdaConfig(k=k, alpha=alpha, beta=beta, seed=seed,
                         iterations=1, burn_in=0),
        terms=tuple(terms),
        vocab_digest=digest,
        doc_ids=tuple(doc_id for doc_id, _ in theta_rows),
        phi=phi,
        theta=theta,
    )
    return model


# ---------------------------------------------------------------------------
# coherence
# ---------------------------------------------------------------------------


def coherence_umass(model: TopicModel, vectors: Sequence[DocVector],
                    top_n: int = 10) -> Tuple[List[float], float]:
    """Document co-occurrence coherence per topic and its mean.

    Per topic, terms are the top_n by phi; the score is the sum over
    pairs (i earlier than j) of ln((D(wi,wj)+1)/D(wj)).
    """
    if top_n < 1:
        raise DegenerateConfig(f"top_n must be >= 1, got {top_n}")
    needed: Dict[int, set] = {}
    topic_terms: List[List[int]] = []
    term_index = {t: i for i, t in enumerate(model.terms)}
    for t in range(model.k()):
        ids = [term_index[term] for term, _ in top_keywords(model, t, top_n)]
        topic_terms.append(ids)
        for w in ids:
            needed.setdefault(w, set())
    for d, vec in enumerate(vectors):
        for term_id, _ in vec.entries:
            if term_id in needed:
                needed[term_id].add(d)
    scores = []
    for t, ids in enumerate(topic_terms):
        total = 0.0
        for j in range(1, len(ids)):
            dj = len(needed[ids[j]])
            if dj == 0:
                raise VocabMismatch(
                    f"topic {t}: top term {model.terms[ids[j]]!r} absent from the corpus"
                )
            for i in range(j):
                dij = len(needed[ids[i]] & needed[ids[j]])
                total += math.log((dij + 1.0) / dj)
        scores.append(total)
    return scores, float(np.mean(scores))


def _window_counts(token_docs: Sequence[Sequence[str]], tracked: List[str], window: int):
    """Boolean sliding-window occurrence counts for tracked terms.

    Documents shorter than the window contribute a single window, which
    reduces to plain document co-occurrence.
    """
    t_index = {t: i for i, t in enumerate(tracked)}
    n = len(tracked)
    singles = np.zeros(n)
    pairs = np.zeros((n, n))
    n_windows = 0
    for toks in token_docs:
        length = len(toks)
        if length == 0:
            continue
        nw = max(1, length - window + 1)
        n_windows += nw
        present: Dict[int, List[int]] = {}
        for pos, tok in enumerate(toks):
            i = t_index.get(tok)
            if i is not None:
                present.setdefault(i, []).append(pos)
        if not present:
            continue
        ids = sorted(present)
        if nw == 1:
            for a, i in enumerate(ids):
                singles[i] += 1
                for j in ids[a + 1:]:
                    pairs[i, j] += 1
                    pairs[j, i] += 1
            continue
        occ = {}
        for i in ids:
            marks = np.zeros(length + 1)
            for pos in present[i]:
                marks[pos + 1] = 1
            prefix = np.cumsum(marks)
            occ[i] = (prefix[window:window + nw] - prefix[:nw]) > 0
            singles[i] += occ[i].sum()
        for a, i in enumerate(ids):
            for j in ids[a + 1:]:
                both = float(np.logical_and(occ[i], occ[j]).sum())
                pairs[i, j] += both
                pairs[j, i] += both
    return singles, pairs, n_windows


def _npmi(n_i: float, n_j: float, n_ij: float, n_windows: int) -> float:
    if n_ij == 0:
        return -1.0
    if n_ij >= n_windows:
        return 1.0
    p_ij = n_ij / n_windows
    p_i = n_i / n_windows
    p_j = n_j / n_windows
    val = math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))
    return max(-1.0, min(1.0, val))


def coherence_cv(model: TopicModel, token_docs: Sequence[Sequence[str]],
                 top_n: int = 10, window: int = 110) -> Tuple[List[float], float]:
    """Sliding-window NPMI coherence per topic and its mean.

    Each top term gets an NPMI vector against the topic's top set; the
    topic score is the mean cosine between those vectors and their sum
    (one-set segmentation). Scores live in [-1, 1]; a single-term topic
    is defined as 1.0.
    """
    if top_n < 1:
        raise DegenerateConfig(f"top_n must be >= 1, got {top_n}")
    if window < 1:
        raise DegenerateConfig(f"window must be >= 1, got {window}")
    topic_terms = [
        [term for term, _ in top_keywords(model, t, top_n)] for t in range(model.k())
    ]
    tracked = sorted({term for terms in topic_terms for term in terms})
    singles, pairs, n_windows = _window_counts(token_docs, tracked, window)
    if n_windows == 0:
        raise EmptyCorpus("no non-empty documents to slide windows over")
    t_index = {t: i for i, t in enumerate(tracked)}
    for term in tracked:
        if singles[t_index[term]] == 0:
            raise VocabMismatch(f"top term {term!r} never occurs in the token streams")
    scores = []
    for terms in topic_terms:
        m = len(terms)
        if m == 1:
            scores.append(1.0)
            continue
        ids = [t_index[t] for t in terms]
        mat = np.empty((m, m))
        for a in range(m):
            for b in range(m):
                i, j = ids[a], ids[b]
                n_ij = singles[i] if i == j else pairs[i, j]
                mat[a, b] = _npmi(singles[i], singles[j], n_ij, n_windows)
        ref = mat.sum(axis=0)
        ref_norm = float(np.linalg.norm(ref))
        sims = []
        for a in range(m):
            v_norm = float(np.linalg.norm(mat[a]))
            if v_norm == 0.0 or ref_norm == 0.0:
                sims.append(0.0)
            else:
                sims.append(float(np.dot(mat[a], ref) / (v_norm * ref_norm)))
        scores.append(float(np.mean(sims)))
    return scores, float(np.mean(scores))


@dataclass(frozen=True)
class CoherenceReport:
    """Scan results: one (k, umass, cv) row per candidate, plus the pick."""

    rows: Tuple[Tuple[int, float, float], ...]
    selected_k: int
    measure: str
    fit_seconds: float


def coherence_scan(
    documents: Sequence[EncounterDocument],
    vectors: Sequence[DocVector],
    vocab: Vocabulary,
    k_values: Iterable[int],
    template: LdaConfig,
    measure: str = "cv",
    top_n: int = 10,
    window: int = 110,
) -> CoherenceReport:
    """Fit one model per candidate k and pick the coherence argmax.

    Per-k seeds derive as template.seed + k so candidates are
    independent of scan order. Exact ties go to the smallest k.
    """
    ks = sorted(set(int(k) for k in k_values))
    if not ks:
        raise DegenerateConfig("no k values to scan")
    if measure not in ("cv", "umass"):
        raise DegenerateConfig(f"unknown coherence measure {measure!r}")
    token_docs = [doc.tokens for doc in documents]
    rows = []
    best_k, best_val = None, None
    t0 = time.perf_counter()
    for k in ks:
        cfg = dataclasses.replace(template, k=k, seed=template.seed + k)
        model = fit_lda(vectors, vocab, cfg)
        _, umass = coherence_umass(model, vectors, top_n=top_n)
        _, cv = coherence_cv(model, token_docs, top_n=top_n, window=window)
        rows.append((k, umass, cv))
        val = cv if measure == "cv" else umass
        if best_val is None or val > best_val:
            best_k, best_val = k, val
    return CoherenceReport(
        rows=tuple(rows), selected_k=int(best_k), measure=measure,
        fit_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# per-patient trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryRow:
    patient_id: str
    encounter_id: str
    admit_date: str
    diag_topic: Optional[int]
    diag_contribution: Optional[float]
    proc_topic: Optional[int]
    proc_contribution: Optional[float]


def topic_trajectory(
    dataset,
    patient_id: str,
    diag_assignments: Dict[str, TopicAssignment],
    proc_assignments: Dict[str, TopicAssignment],
) -> List[TrajectoryRow]:
    """Chronological dominant-topic sequence for one patient.

    Encounters sort by (admit date, encounter id). An encounter missing
    from one source keeps None in that slot rather than vanishing.
    """
    encs = [e for e in dataset.encounters if e.patient_id == patient_id]
    if not encs:
        raise UnknownPatient(f"patient {patient_id!r} has no encounters")
    encs.sort(key=lambda e: (e.admit_date, e.encounter_id))
    rows = []
    for e in encs:
        da = diag_assignments.get(e.encounter_id)
        pa = proc_assignments.get(e.encounter_id)
        rows.append(
            TrajectoryRow(
                patient_id=patient_id,
                encounter_id=e.encounter_id,
                admit_date=e.admit_date.isoformat(),
                diag_topic=None if da is None else da.dominant_topic,
                diag_contribution=None if da is None else da.contribution,
                proc_topic=None if pa is None else pa.dominant_topic,
                proc_contribution=None if pa is None else pa.contribution,
            )
        )
    return rows
