"""Vocabulary construction and document vectorization.

Two weightings are supported: plain term counts (bow) and tf-idf with

    idf(t) = ln((1 + N) / (1 + df(t))) + 1

where N is the number of documents the vocabulary was built over. No
length normalization is applied: the topic sampler treats weights as
fractional counts, and rescaling per document would distort the count
mass each document contributes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import EmptyCorpus, VocabMismatch
from .textprep import EncounterDocument

WEIGHTINGS = ("bow", "tfidf")


@dataclass(frozen=True)
class Vocabulary:
    """Term list in fixed lexicographic order plus document frequencies."""

    terms: Tuple[str, ...]
    doc_freq: Tuple[int, ...]
    n_docs: int

    def __post_init__(self):
        if len(self.terms) != len(self.doc_freq):
            raise ValueError("terms and doc_freq length mismatch")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def index(self, term: str) -> int:
        return getattr(self, "_index")[term]

    def __contains__(self, term: str) -> bool:
        return term in getattr(self, "_index")

    def digest(self) -> str:
        h = hashlib.sha256()
        for t in self.terms:
            h.update(t.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class DocVector:
    """Sparse weighted document: (term_id, weight) with ids strictly increasing."""

    doc_id: str
    entries: Tuple[Tuple[int, float], ...]

    def total_weight(self) -> float:
        return sum(w for _, w in self.entries)


def build_vocabulary(docs: Sequence[EncounterDocument], min_doc_freq: int = 1) -> Vocabulary:
    """Collect terms over the corpus, sorted lexicographically.

    Terms occurring in fewer than min_doc_freq documents are dropped.
    Raises EmptyCorpus when no document has any token, or when the
    frequency floor removes everything.
    """
    if min_doc_freq < 1:
        raise ValueError(f"min_doc_freq must be >= 1, got {min_doc_freq}")
    df: Dict[str, int] = {}
    any_tokens = False
    for doc in docs:
        if not doc.tokens:
            continue
        any_tokens = True
        for t in set(doc.tokens):
            df[t] = df.get(t, 0) + 1
    if not any_tokens:
        raise EmptyCorpus("no document contains any token")
    kept = sorted(t for t, c in df.items() if c >= min_doc_freq)
    if not kept:
        raise EmptyCorpus(f"min_doc_freq={min_doc_freq} removed every term")
    return Vocabulary(
        terms=tuple(kept),
        doc_freq=tuple(df[t] for t in kept),
        n_docs=len(docs),
    )


def _count(doc: EncounterDocument, vocab: Vocabulary) -> List[Tuple[int, int]]:
    counts: Dict[int, int] = {}
    for t in doc.tokens:
        if t in vocab:
            i = vocab.index(t)
            counts[i] = counts.get(i, 0) + 1
    return sorted(counts.items())


def bow_vectors(docs: Sequence[EncounterDocument], vocab: Vocabulary) -> List[DocVector]:
    """Integer term counts. Tokens outside the vocabulary are ignored."""
    out = []
    for doc in docs:
        entries = tuple((i, float(c)) for i, c in _count(doc, vocab))
        out.append(DocVector(doc_id=doc.encounter_id, entries=entries))
    return out


def idf(vocab: Vocabulary, term_id: int) -> float:
    return math.log((1.0 + vocab.n_docs) / (1.0 + vocab.doc_freq[term_id])) + 1.0


def tfidf_vectors(docs: Sequence[EncounterDocument], vocab: Vocabulary) -> List[DocVector]:
    """Term count times smoothed idf, no length normalization."""
    idf_cache = [idf(vocab, i) for i in range(len(vocab))]
    out = []
    for doc in docs:
        entries = tuple((i, c * idf_cache[i]) for i, c in _count(doc, vocab))
        out.append(DocVector(doc_id=doc.encounter_id, entries=entries))
    return out


def vectors_for(weighting: str, docs: Sequence[EncounterDocument], vocab: Vocabulary) -> List[DocVector]:
    if weighting == "bow":
        return bow_vectors(docs, vocab)
    if weighting == "tfidf":
        return tfidf_vectors(docs, vocab)
    raise ValueError(f"unknown weighting {weighting!r}, expected one of {WEIGHTINGS}")


def vectors_to_tsv_lines(vectors: Iterable[DocVector]) -> List[str]:
    """One line per document: doc_id<TAB>term_id:weight,term_id:weight,..."""
    lines = []
    for v in vectors:
        cells = ",".join(f"{i}:{w!r}" for i, w in v.entries)
        lines.append(f"{v.doc_id}\t{cells}")
    return lines


def vectors_from_tsv_lines(lines: Iterable[str], vocab_size: int) -> List[DocVector]:
    out = []
    for line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        doc_id, _, rest = line.partition("\t")
        entries: List[Tuple[int, float]] = []
        if rest:
            for cell in rest.split(","):
                ids, _, ws = cell.partition(":")
                i = int(ids)
                if not 0 <= i < vocab_size:
                    raise VocabMismatch(f"term id {i} outside vocabulary of size {vocab_size}")
                entries.append((i, float(ws)))
        out.append(DocVector(doc_id=doc_id, entries=tuple(entries)))
    return out
