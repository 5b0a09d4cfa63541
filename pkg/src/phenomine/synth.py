"""Synthetic corpora and cohorts with known ground truth.

Two generators:

  generate_lda_corpus  token documents drawn from a planted topic model,
                       optionally with disjoint per-topic vocabularies
  generate_cohort      a full input bundle (encounters.csv, notes.jsonl,
                       ccsr.csv, gazetteer.txt, manifest.json) whose
                       stay-length class is a noisy deterministic
                       function of the planted topics

Everything is driven by one seeded generator in a fixed order, so a
given (parameters, seed) pair always produces identical bytes.

topic_recovery_score matches estimated topics to planted ones by total
variation distance; exact assignment for k <= 8, greedy beyond.
"""

from __future__ import annotations

import datetime as dt
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cohort import LOS_BINS, LosCategory
from .errors import DegenerateConfig, DimensionMismatch
from .textprep import DocSource, EncounterDocument


# ---------------------------------------------------------------------------
# planted topic-model corpora
# ---------------------------------------------------------------------------


@dataclass
class LdaCorpusManifest:
    """Ground truth for a generated corpus."""

    seed: int
    true_k: int
    vocab: List[str]
    phi: np.ndarray          # true_k x vocab_size
    thetas: np.ndarray       # n_docs x true_k
    doc_len: int
    alpha: float
    disjoint: bool


@dataclass
class SyntheticCorpus:
    docs: List[List[str]]    # token documents
    manifest: LdaCorpusManifest

    def documents(self, source: DocSource = DocSource.PROCEDURE) -> List[EncounterDocument]:
        width = max(4, len(str(len(self.docs))))
        return [
            EncounterDocument(encounter_id=f"d{i:0{width}d}", source=source, tokens=tuple(toks))
            for i, toks in enumerate(self.docs)
        ]


def _disjoint_phi(true_k: int, vocab_size: int) -> np.ndarray:
    """Uniform rows over contiguous, non-overlapping vocabulary blocks."""
    phi = np.zeros((true_k, vocab_size))
    base, extra = divmod(vocab_size, true_k)
    start = 0
    for k in range(true_k):
        size = base + (1 if k < extra else 0)
        phi[k, start:start + size] = 1.0 / size
        start += size
    return phi


def generate_lda_corpus(
    true_k: int,
    vocab_size: int,
    n_docs: int,
    doc_len: int,
    alpha: float = 0.1,
    seed: int = 0,
    disjoint: bool = True,
) -> SyntheticCorpus:
    """Sample token documents from a planted topic model.

    With disjoint=True the vocabulary is partitioned into true_k blocks
    and each topic is uniform over its own block; otherwise topic rows
    are drawn from a sparse Dirichlet. Every document has exactly
    doc_len tokens, so the corpus holds n_docs * doc_len tokens.
    """
    if true_k < 1 or vocab_size < true_k or n_docs < 1 or doc_len < 1:
        raise DegenerateConfig(
            f"bad corpus shape: k={true_k} vocab={vocab_size} docs={n_docs} len={doc_len}"
        )
    if alpha <= 0:
        raise DegenerateConfig(f"alpha must be positive, got {alpha}")
    rng = np.random.default_rng(seed)
    vocab = [f"w{i:04d}" for i in range(vocab_size)]
    if disjoint:
        phi = _disjoint_phi(true_k, vocab_size)
    else:
        phi = rng.dirichlet(np.full(vocab_size, 0.1), size=true_k)
    thetas = rng.dirichlet(np.full(true_k, alpha), size=n_docs)
    cum_phi = np.cumsum(phi, axis=1)
    docs: List[List[str]] = []
    for d in range(n_docs):
        zs = rng.choice(true_k, size=doc_len, p=thetas[d])
        us = rng.random(doc_len)
        words = [vocab[int(np.searchsorted(cum_phi[z], u))] for z, u in zip(zs, us)]
        docs.append(words)
    manifest = LdaCorpusManifest(
        seed=seed, true_k=true_k, vocab=vocab, phi=phi, thetas=thetas,
        doc_len=doc_len, alpha=alpha, disjoint=disjoint,
    )
    return SyntheticCorpus(docs=docs, manifest=manifest)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def topic_recovery_score(true_phi: np.ndarray, est_phi: np.ndarray) -> float:
    """Mean total-variation distance under the best topic matching.

    0 means perfect recovery, 1 means disjoint supports everywhere.
    Exhaustive over permutations for k <= 8, greedy assignment above.
    """
    true_phi = np.asarray(true_phi, dtype=float)
    est_phi = np.asarray(est_phi, dtype=float)
    if true_phi.shape != est_phi.shape:
        raise DimensionMismatch(f"phi shapes differ: {true_phi.shape} vs {est_phi.shape}")
    if true_phi.ndim != 2:
        raise DimensionMismatch(f"phi must be 2-d, got shape {true_phi.shape}")
    k = true_phi.shape[0]
    cost = np.zeros((k, k))
    for i in range(k):
        cost[i] = 0.5 * np.abs(est_phi - true_phi[i]).sum(axis=1)
    if k <= 8:
        best = min(
            sum(cost[i, perm[i]] for i in range(k))
            for perm in itertools.permutations(range(k))
        )
    else:
        remaining = set(range(k))
        best = 0.0
        for i in range(k):
            j = min(remaining, key=lambda c: cost[i, c])
            best += cost[i, j]
            remaining.remove(j)
    return best / k


# ---------------------------------------------------------------------------
# full cohort generator
# ---------------------------------------------------------------------------


@dataclass
class CohortManifest:
    """Everything needed to audit a generated cohort."""

    seed: int
    n_encounters: int
    n_patients: int
    k_diag: int
    k_proc: int
    flip_prob: float
    negation_rate: float
    planted_map: List[int]
    diag_vocab: List[str]
    proc_vocab: List[str]
    phi_diag: List[List[float]]
    phi_proc: List[List[float]]
    class_histogram: Dict[str, int]
    n_notes: int
    n_decoy_notes: int
    encounters: List[dict] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "n_encounters": self.n_encounters,
            "n_patients": self.n_patients,
            "k_diag": self.k_diag,
            "k_proc": self.k_proc,
            "flip_prob": self.flip_prob,
            "negation_rate": self.negation_rate,
            "planted_map": self.planted_map,
            "diag_vocab": self.diag_vocab,
            "proc_vocab": self.proc_vocab,
            "phi_diag": self.phi_diag,
            "phi_proc": self.phi_proc,
            "class_histogram": self.class_histogram,
            "n_notes": self.n_notes,
            "n_decoy_notes": self.n_decoy_notes,
            "encounters": self.encounters,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CohortManifest":
        d = json.loads(text)
        return cls(**d)


# class for each diagnostic topic, cycled to cover all five stay lengths;
# the doubled SHORT makes the label distribution imbalanced on purpose.
_BASE_MAP_CYCLE = [0, 1, 1, 2, 3, 4]

_SECTION_CYCLE = ("IMPRESSION", "FINDINGS", "CONCLUSION")

_STUDIES = ("CHEST X-RAY", "ECHOCARDIOGRAM", "ECG", "CT CHEST")


def _los_days_for(cls: LosCategory, rng: np.random.Generator) -> int:
    lo, hi = LOS_BINS[int(cls)]
    if hi is None:
        hi = 40
    return int(rng.integers(lo, hi + 1))


def generate_cohort(
    out_dir: str,
    n_encounters: int = 200,
    k_diag: int = 6,
    k_proc: int = 6,
    seed: int = 0,
    flip_prob: float = 0.1,
    negation_rate: float = 0.2,
    words_per_topic: int = 25,
    alpha: float = 0.05,
    decoy_rate: float = 0.05,
) -> CohortManifest:
    """Write a synthetic input bundle with planted topic structure.

    Stay-length class is planted_map[true diagnostic topic], flipped to a
    random other class with probability flip_prob. The procedure volume
    carries the same kind of block structure plus planted "no <term>"
    negations at negation_rate. A gazetteer covering the procedure
    vocabulary is written next to the data so the entity filter keeps
    the planted terms.
    """
    if n_encounters < 50:
        raise DegenerateConfig(f"n_encounters must be >= 50, got {n_encounters}")
    if not (0 <= flip_prob < 1) or not (0 <= negation_rate <= 1):
        raise DegenerateConfig("flip_prob must be in [0,1) and negation_rate in [0,1]")
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    diag_vocab = [f"dmark{i:04d}" for i in range(k_diag * words_per_topic)]
    proc_vocab = [f"pmark{i:04d}" for i in range(k_proc * words_per_topic)]
    phi_diag = _disjoint_phi(k_diag, len(diag_vocab))
    phi_proc = _disjoint_phi(k_proc, len(proc_vocab))
    cum_diag = np.cumsum(phi_diag, axis=1)
    cum_proc = np.cumsum(phi_proc, axis=1)
    code_of = {w: f"C{i:04d}" for i, w in enumerate(diag_vocab)}
    planted_map = [_BASE_MAP_CYCLE[t % len(_BASE_MAP_CYCLE)] for t in range(k_diag)]

    n_patients = max(1, int(round(n_encounters / 1.7)))
    patient_ids = [f"p{i:05d}" for i in range(n_patients)]
    assignment = list(range(n_patients))
    assignment += [int(rng.integers(0, n_patients)) for _ in range(n_encounters - n_patients)]

    enc_rows: List[List[str]] = []
    note_records: List[dict] = []
    manifest_rows: List[dict] = []
    histogram = {cat.label: 0 for cat in LosCategory}
    n_notes = 0
    n_decoys = 0

    for idx in range(n_encounters):
        enc_id = f"e{idx:05d}"
        pid = patient_ids[assignment[idx]]

        theta_d = rng.dirichlet(np.full(k_diag, alpha))
        theta_p = rng.dirichlet(np.full(k_proc, alpha))

        # diagnostic word draws -> codes; the planted topic is the realized
        # mode of the draws, not argmax(theta), so the text always carries it
        diag_len = int(rng.integers(12, 29))
        zs = rng.choice(k_diag, size=diag_len, p=theta_d)
        us = rng.random(diag_len)
        true_d = int(np.argmax(np.bincount(zs, minlength=k_diag)))
        diag_words = [diag_vocab[int(np.searchsorted(cum_diag[z], u))] for z, u in zip(zs, us)]
        codes = [code_of[w] for w in diag_words]
        if rng.random() < 0.10:
            codes.append("C9999")  # maps to the filtered 'heart failure' category
        if rng.random() < 0.05:
            codes.append("X9999")  # absent from the code map on purpose

        # procedure word draws -> note sentences
        proc_len = int(rng.integers(10, 23))
        zs = rng.choice(k_proc, size=proc_len, p=theta_p)
        us = rng.random(proc_len)
        true_p = int(np.argmax(np.bincount(zs, minlength=k_proc)))
        proc_words = [proc_vocab[int(np.searchsorted(cum_proc[z], u))] for z, u in zip(zs, us)]
        negated_flags = rng.random(proc_len) < negation_rate

        n_enc_notes = int(rng.integers(1, 4))
        splits = sorted(rng.integers(0, proc_len + 1, size=n_enc_notes - 1).tolist())
        bounds = [0] + splits + [proc_len]
        for j in range(n_enc_notes):
            lo, hi = bounds[j], bounds[j + 1]
            sentences = []
            for w, neg in zip(proc_words[lo:hi], negated_flags[lo:hi]):
                sentences.append(f"No {w}." if neg else f"{w}.")
            if rng.random() < 0.3:
                sentences.append("Electronically signed.")
            study = _STUDIES[int(rng.integers(0, len(_STUDIES)))]
            section = _SECTION_CYCLE[int(rng.integers(0, len(_SECTION_CYCLE)))]
            body = " ".join(sentences) if sentences else "Unremarkable."
            text = f"PROCEDURE: {study}.\n{section}: {body}"
            note_records.append({"encounter_id": enc_id, "text": text})
            n_notes += 1
        if rng.random() < decoy_rate:
            note_records.append(
                {"encounter_id": enc_id, "text": "Routine administrative documentation. 12345."}
            )
            n_decoys += 1
            n_notes += 1

        base_class = planted_map[true_d]
        flipped = bool(rng.random() < flip_prob)
        if flipped:
            others = [c for c in range(len(LosCategory)) if c != base_class]
            cls = LosCategory(int(others[int(rng.integers(0, len(others)))]))
        else:
            cls = LosCategory(base_class)
        days = _los_days_for(cls, rng)
        admit = dt.date(2019, 1, 1) + dt.timedelta(days=int(rng.integers(0, 1461)))
        discharge = admit + dt.timedelta(days=days)
        histogram[cls.label] += 1

        enc_rows.append(
            [enc_id, pid, admit.isoformat(), discharge.isoformat(), ";".join(codes)]
        )
        manifest_rows.append(
            {
                "encounter_id": enc_id,
                "patient_id": pid,
                "admit_date": admit.isoformat(),
                "true_diag_topic": true_d,
                "true_proc_topic": true_p,
                "diag_contribution": float(theta_d[true_d]),
                "proc_contribution": float(theta_p[true_p]),
                "los_days": days,
                "los_class": int(cls),
                "flipped": flipped,
            }
        )

    # write the bundle
    with open(out / "encounters.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("encounter_id,patient_id,admit_date,discharge_date,icd10_codes\n")
        for row in enc_rows:
            fh.write(",".join(row) + "\n")
    with open(out / "notes.jsonl", "w", encoding="utf-8") as fh:
        for rec in note_records:
            fh.write(json.dumps(rec) + "\n")
    with open(out / "ccsr.csv", "w", encoding="utf-8") as fh:
        fh.write("icd10_code,ccsr_description\n")
        for w in diag_vocab:
            fh.write(f"{code_of[w]},{w}\n")
        fh.write("C9999,heart failure\n")
    with open(out / "gazetteer.txt", "w", encoding="utf-8") as fh:
        fh.write("# generated alongside the synthetic cohort\n[terms]\n")
        for w in proc_vocab:
            fh.write(w + "\n")
        fh.write("[stop_entities]\nelectronically signed\npreliminary\n")

    manifest = CohortManifest(
        seed=seed,
        n_encounters=n_encounters,
        n_patients=n_patients,
        k_diag=k_diag,
        k_proc=k_proc,
        flip_prob=flip_prob,
        negation_rate=negation_rate,
        planted_map=planted_map,
        diag_vocab=diag_vocab,
        proc_vocab=proc_vocab,
        phi_diag=phi_diag.tolist(),
        phi_proc=phi_proc.tolist(),
        class_histogram=histogram,
        n_notes=n_notes,
        n_decoy_notes=n_decoys,
        encounters=manifest_rows,
    )
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest
