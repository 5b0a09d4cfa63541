"""Pipeline stages: each reads validated artifacts, writes the next one.

Stage outputs live in a single artifact directory. Every file records
digests of what it was built from, and each stage checks those before
trusting upstream output (see artifacts.py). The stages are thin glue;
the actual work happens in the library modules.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import report as figs
from .artifacts import (
    ensure_dir,
    escape_field,
    file_digest,
    read_artifact,
    read_json_artifact,
    require_fresh,
    unescape_field,
    write_artifact,
    write_json_artifact,
)
from .cohort import CohortDataset, Encounter, LosCategory, bin_los, compute_los
from .config import PipelineConfig, derive_seed
from .errors import (
    DataError,
    EmptyCorpus,
    InvariantViolation,
    SchemaError,
)
from .features import (
    FeatureMatrix,
    SmoteConfig,
    SplitSpec,
    assemble_features,
    matrix_to_csv_lines,
    select_source,
    smote,
    stratified_split,
)
from .ingest import codes_to_text, extract_report_section, load_ccsr_map, load_notes, parse_encounters
from .learn import CLASSIFIERS, N_CLASSES, evaluate, model_from_dict, train
from .textprep import (
    DocSource,
    EncounterDocument,
    Phrase,
    default_negex_lexicon,
    detect_negation,
    entity_filter,
    load_gazetteer,
    load_negex_lexicon,
    load_stopwords,
    merge_encounter,
    split_phrases,
)
from .topics import (
    LdaConfig,
    TopicAssignment,
    TopicModel,
    assignments_from_model,
    coherence_scan,
    fit_lda,
    load_model,
    save_model,
    top_keywords,
    topic_trajectory,
)
from .vectorize import WEIGHTINGS, Vocabulary, build_vocabulary, vectors_for

COHORT_TSV = "cohort.tsv"
NOTES_TSV = "notes.tsv"
DOCS_TSV = "docs.tsv"
LABELS_TSV = "labels.tsv"
COHERENCE_TSV = "coherence.tsv"
FEATURES_CSV = "features.csv"
CLASSIFIERS_JSON = "classifiers.json"
REPORT_JSON = "report.json"
TRAJECTORY_TSV = "trajectory.tsv"

SOURCES = ("diag", "proc")


def _path(out_dir: str, name: str) -> str:
    return os.path.join(out_dir, name)


def vocab_name(source: str) -> str:
    return f"vocab_{source}.tsv"


def vectors_name(source: str, weighting: str) -> str:
    return f"vectors_{source}_{weighting}.tsv"


def model_name(source: str, weighting: str) -> str:
    return f"model_{source}_{weighting}.txt"


def topics_name(source: str) -> str:
    return f"topics_{source}.tsv"


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


def stage_ingest(encounters_path: str, notes_path: str, ccsr_path: str,
                 out_dir: str) -> Dict[str, int]:
    """Parse and validate raw inputs into cohort.tsv and notes.tsv."""
    ensure_dir(out_dir)
    dataset = parse_encounters(encounters_path)
    dataset = load_notes(notes_path, dataset)
    ccsr = load_ccsr_map(ccsr_path)

    unknown_total = 0
    cohort_lines = []
    for e in dataset.encounters:
        phrases, unknown = codes_to_text(e.icd10_codes, ccsr)
        unknown_total += unknown
        days = compute_los(e.admit_date, e.discharge_date)
        cat = bin_los(days)
        cohort_lines.append("\t".join([
            e.encounter_id, e.patient_id,
            e.admit_date.isoformat(), e.discharge_date.isoformat(),
            str(days), str(int(cat)), cat.label,
            json.dumps(phrases, separators=(",", ":")),
        ]))
    write_artifact(
        _path(out_dir, COHORT_TSV), "COHORT",
        {
            "in_encounters": file_digest(encounters_path),
            "in_ccsr": file_digest(ccsr_path),
            "n_encounters": str(len(dataset.encounters)),
            "dropped_no_codes": str(dataset.dropped_no_codes),
            "unknown_codes": str(unknown_total),
        },
        cohort_lines,
    )

    note_lines = []
    no_section = 0
    n_notes = 0
    for e in dataset.encounters:
        for seq, note in enumerate(dataset.notes_for(e.encounter_id)):
            n_notes += 1
            section = extract_report_section(note.text)
            if section is None:
                no_section += 1
                continue
            note_lines.append("\t".join([
                e.encounter_id, str(seq), section.header, escape_field(section.text),
            ]))
    write_artifact(
        _path(out_dir, NOTES_TSV), "NOTES",
        {
            "in_notes": file_digest(notes_path),
            "n_notes": str(n_notes),
            "orphan_notes": str(dataset.orphan_notes),
            "no_section": str(no_section),
        },
        note_lines,
    )
    return {
        "encounters": len(dataset.encounters),
        "dropped_no_codes": dataset.dropped_no_codes,
        "unknown_codes": unknown_total,
        "notes_kept": len(note_lines),
        "orphan_notes": dataset.orphan_notes,
        "no_section": no_section,
    }


def _read_cohort(out_dir: str) -> Tuple[Dict[str, str], List[Tuple[Encounter, int, List[str]]]]:
    """cohort.tsv rows as (encounter, los_days, diag phrases)."""
    fields, lines = read_artifact(_path(out_dir, COHORT_TSV), "COHORT")
    rows = []
    for line in lines:
        parts = line.split("\t")
        if len(parts) != 8:
            raise SchemaError(f"{COHORT_TSV}: expected 8 cells, got {len(parts)}")
        enc = Encounter(
            encounter_id=parts[0], patient_id=parts[1],
            admit_date=dt.date.fromisoformat(parts[2]),
            discharge_date=dt.date.fromisoformat(parts[3]),
            icd10_codes=(),
        )
        rows.append((enc, int(parts[4]), json.loads(parts[7])))
    return fields, rows


def _read_notes(out_dir: str) -> Tuple[Dict[str, str], Dict[str, List[str]]]:
    fields, lines = read_artifact(_path(out_dir, NOTES_TSV), "NOTES")
    grouped: Dict[str, List[str]] = {}
    for line in lines:
        parts = line.split("\t")
        if len(parts) != 4:
            raise SchemaError(f"{NOTES_TSV}: expected 4 cells, got {len(parts)}")
        grouped.setdefault(parts[0], []).append(unescape_field(parts[3]))
    return fields, grouped


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------


def stage_preprocess(out_dir: str, gazetteer_path: Optional[str] = None,
                     negex_path: Optional[str] = None,
                     stopwords_path: Optional[str] = None) -> Dict[str, int]:
    """Negation, entity filtering, and merge into per-encounter documents."""
    _, cohort_rows = _read_cohort(out_dir)
    _, notes = _read_notes(out_dir)
    lexicon = load_negex_lexicon(negex_path) if negex_path else default_negex_lexicon()
    stopwords = load_stopwords(stopwords_path)
    gazetteer = load_gazetteer(gazetteer_path)

    doc_lines = []
    n_diag = n_proc = 0
    dropped_empty_diag = dropped_empty_proc = 0
    for enc, _days, phrases in cohort_rows:
        diag_phrases = [Phrase(text=p, negated=False) for p in phrases]
        diag_doc = merge_encounter([diag_phrases], enc.encounter_id,
                                   DocSource.DIAGNOSTIC, stopwords)
        if diag_doc.tokens:
            n_diag += 1
            doc_lines.append(f"{enc.encounter_id}\tdiag\t{' '.join(diag_doc.tokens)}")
        else:
            dropped_empty_diag += 1

        note_phrases = []
        for text in notes.get(enc.encounter_id, []):
            kept: List[Phrase] = []
            for p in split_phrases(text):
                kept.extend(detect_negation(p, lexicon))
            note_phrases.append(entity_filter(kept, gazetteer))
        if note_phrases:
            proc_doc = merge_encounter(note_phrases, enc.encounter_id,
                                       DocSource.PROCEDURE, stopwords)
            if proc_doc.tokens:
                n_proc += 1
                doc_lines.append(f"{enc.encounter_id}\tproc\t{' '.join(proc_doc.tokens)}")
            else:
                dropped_empty_proc += 1
        else:
            dropped_empty_proc += 1

    write_artifact(
        _path(out_dir, DOCS_TSV), "DOCS",
        {
            "in_cohort": file_digest(_path(out_dir, COHORT_TSV)),
            "in_notes": file_digest(_path(out_dir, NOTES_TSV)),
            "n_diag": str(n_diag),
            "n_proc": str(n_proc),
            "dropped_empty_diag": str(dropped_empty_diag),
            "dropped_empty_proc": str(dropped_empty_proc),
        },
        doc_lines,
    )
    return {
        "diag_docs": n_diag,
        "proc_docs": n_proc,
        "dropped_empty_diag": dropped_empty_diag,
        "dropped_empty_proc": dropped_empty_proc,
    }


def load_documents(out_dir: str) -> Dict[str, List[EncounterDocument]]:
    """docs.tsv split back into per-source document lists (file order)."""
    fields, lines = read_artifact(_path(out_dir, DOCS_TSV), "DOCS")
    require_fresh(fields, {
        "in_cohort": _path(out_dir, COHORT_TSV),
        "in_notes": _path(out_dir, NOTES_TSV),
    }, _path(out_dir, DOCS_TSV))
    out: Dict[str, List[EncounterDocument]] = {"diag": [], "proc": []}
    for line in lines:
        parts = line.split("\t")
        if len(parts) != 3 or parts[1] not in out:
            raise SchemaError(f"{DOCS_TSV}: bad row {line[:60]!r}")
        source = DocSource.DIAGNOSTIC if parts[1] == "diag" else DocSource.PROCEDURE
        out[parts[1]].append(EncounterDocument(
            encounter_id=parts[0], source=source, tokens=tuple(parts[2].split(" ")),
        ))
    return out


# ---------------------------------------------------------------------------
# fit-topics
# ---------------------------------------------------------------------------


def stage_fit_topics(out_dir: str, config: PipelineConfig) -> Dict[str, str]:
    """Fit one model per note source and weighting; write vocab and vectors."""
    docs = load_documents(out_dir)
    docs_digest = file_digest(_path(out_dir, DOCS_TSV))
    summary: Dict[str, str] = {}
    for source in SOURCES:
        source_docs = docs[source]
        if not source_docs:
            raise EmptyCorpus(f"no {source} documents in {DOCS_TSV}")
        vocab = build_vocabulary(source_docs, min_doc_freq=config.min_doc_freq)
        write_artifact(
            _path(out_dir, vocab_name(source)), "VOCAB",
            {
                "in_docs": docs_digest,
                "source": source,
                "n_docs": str(vocab.n_docs),
                "min_doc_freq": str(config.min_doc_freq),
                "digest": vocab.digest(),
            },
            [f"{t}\t{df}" for t, df in zip(vocab.terms, vocab.doc_freq)],
        )
        k = config.k_diag if source == "diag" else config.k_proc
        for weighting in WEIGHTINGS:
            vectors = vectors_for(weighting, source_docs, vocab)
            kept = [v for v in vectors if v.entries]
            dropped_oov = len(vectors) - len(kept)
            from .vectorize import vectors_to_tsv_lines

            write_artifact(
                _path(out_dir, vectors_name(source, weighting)), "VECTORS",
                {
                    "in_docs": docs_digest,
                    "source": source,
                    "weighting": weighting,
                    "vocab": vocab.digest(),
                    "n": str(len(kept)),
                    "dropped_oov": str(dropped_oov),
                },
                vectors_to_tsv_lines(kept),
            )
            lda_cfg = LdaConfig(
                k=k, alpha=config.alpha, beta=config.beta,
                iterations=config.iterations, burn_in=config.burn_in,
                seed=derive_seed(config.seed, f"lda:{source}:{weighting}"),
            )
            model = fit_lda(kept, vocab, lda_cfg)
            save_model(model, _path(out_dir, model_name(source, weighting)))
            summary[f"{source}_{weighting}"] = model_name(source, weighting)
    return summary


def load_topic_model(out_dir: str, source: str, weighting: str) -> TopicModel:
    return load_model(_path(out_dir, model_name(source, weighting)))


def _load_vocab(out_dir: str, source: str) -> Vocabulary:
    fields, lines = read_artifact(_path(out_dir, vocab_name(source)), "VOCAB")
    terms, dfs = [], []
    for line in lines:
        term, df = line.split("\t")
        terms.append(term)
        dfs.append(int(df))
    return Vocabulary(terms=tuple(terms), doc_freq=tuple(dfs), n_docs=int(fields["n_docs"]))


def _load_vectors(out_dir: str, source: str, weighting: str, vocab: Vocabulary):
    from .vectorize import vectors_from_tsv_lines

    fields, lines = read_artifact(_path(out_dir, vectors_name(source, weighting)), "VECTORS")
    require_fresh(fields, {"in_docs": _path(out_dir, DOCS_TSV)},
                  _path(out_dir, vectors_name(source, weighting)))
    if fields.get("vocab") != vocab.digest():
        raise SchemaError(
            f"{vectors_name(source, weighting)} was built against a different vocabulary"
        )
    return vectors_from_tsv_lines(lines, len(vocab))


# ---------------------------------------------------------------------------
# coherence
# ---------------------------------------------------------------------------


def stage_coherence(out_dir: str, config: PipelineConfig, source: str,
                    k_values: Sequence[int]) -> Dict[str, object]:
    """Scan candidate topic counts for one source; plot alongside the table."""
    if source not in SOURCES:
        raise SchemaError(f"source must be one of {SOURCES}, got {source!r}")
    docs = load_documents(out_dir)[source]
    vocab = _load_vocab(out_dir, source)
    vectors = _load_vectors(out_dir, source, config.weighting, vocab)
    template = LdaConfig(
        k=1, alpha=config.alpha, beta=config.beta,
        iterations=config.iterations, burn_in=config.burn_in,
        seed=derive_seed(config.seed, f"scan:{source}:{config.weighting}"),
    )
    doc_ids = {v.doc_id for v in vectors}
    kept_docs = [d for d in docs if d.encounter_id in doc_ids]
    scan = coherence_scan(
        kept_docs, vectors, vocab, k_values, template,
        measure=config.scan_measure, top_n=config.top_n, window=config.cv_window,
    )
    write_artifact(
        _path(out_dir, COHERENCE_TSV), "COHERENCE",
        {
            "in_docs": file_digest(_path(out_dir, DOCS_TSV)),
            "source": source,
            "weighting": config.weighting,
            "measure": scan.measure,
            "selected_k": str(scan.selected_k),
        },
        [f"{k}\t{umass!r}\t{cv!r}" for k, umass, cv in scan.rows],
    )
    figs.save_coherence_figure(
        _path(out_dir, "fig_coherence.png"), scan.rows,
        scan.selected_k, scan.measure,
    )
    return {
        "source": source,
        "selected_k": scan.selected_k,
        "measure": scan.measure,
        "rows": list(scan.rows),
        "fit_seconds": scan.fit_seconds,
    }


# ---------------------------------------------------------------------------
# label / features
# ---------------------------------------------------------------------------


def stage_label(out_dir: str, config: PipelineConfig) -> Dict[str, int]:
    """Write each document's dominant topic and contribution, per source."""
    lines = []
    counts = {}
    fields = {"weighting": config.weighting}
    for source in SOURCES:
        model = load_topic_model(out_dir, source, config.weighting)
        fields[f"in_model_{source}"] = file_digest(
            _path(out_dir, model_name(source, config.weighting))
        )
        assignments = sorted(assignments_from_model(model), key=lambda a: a.doc_id)
        counts[source] = len(assignments)
        for a in assignments:
            lines.append(f"{a.doc_id}\t{source}\t{a.dominant_topic}\t{a.contribution!r}")
    fields.update({f"n_{s}": str(n) for s, n in counts.items()})
    write_artifact(_path(out_dir, LABELS_TSV), "LABELS", fields, lines)
    return counts


def load_topic_labels(out_dir: str) -> Dict[str, Dict[str, Tuple[int, float]]]:
    """labels.tsv back as {source: {doc_id: (dominant_topic, contribution)}}."""
    _, lines = read_artifact(_path(out_dir, LABELS_TSV), "LABELS")
    out: Dict[str, Dict[str, Tuple[int, float]]] = {s: {} for s in SOURCES}
    for line in lines:
        parts = line.split("\t")
        if len(parts) != 4 or parts[1] not in out:
            raise SchemaError(f"{LABELS_TSV}: bad row {line[:60]!r}")
        out[parts[1]][parts[0]] = (int(parts[2]), float(parts[3]))
    return out


def load_los_labels(out_dir: str) -> Dict[str, LosCategory]:
    """Stay-length category per encounter, straight from the cohort table."""
    _, cohort_rows = _read_cohort(out_dir)
    return {enc.encounter_id: bin_los(days) for enc, days, _ in cohort_rows}


def _assignment_map(model: TopicModel) -> Dict[str, TopicAssignment]:
    return {a.doc_id: a for a in assignments_from_model(model)}


def stage_features(out_dir: str, config: PipelineConfig) -> Dict[str, int]:
    """Join stay-length labels with both topic sources into one matrix."""
    los = load_los_labels(out_dir)
    diag_model = load_topic_model(out_dir, "diag", config.weighting)
    proc_model = load_topic_model(out_dir, "proc", config.weighting)
    matrix = assemble_features(
        _assignment_map(diag_model), _assignment_map(proc_model), los,
        mode=config.feature_mode,
    )
    fields = {
        "in_cohort": file_digest(_path(out_dir, COHORT_TSV)),
        "in_model_diag": file_digest(_path(out_dir, model_name("diag", config.weighting))),
        "in_model_proc": file_digest(_path(out_dir, model_name("proc", config.weighting))),
        "mode": config.feature_mode,
        "weighting": config.weighting,
        "n": str(len(matrix.encounter_ids)),
        "dropped_missing": str(matrix.dropped_missing),
    }
    write_artifact(_path(out_dir, FEATURES_CSV), "FEATURES", fields,
                   matrix_to_csv_lines(matrix))
    return {"rows": len(matrix.encounter_ids), "dropped_missing": matrix.dropped_missing}


# ---------------------------------------------------------------------------
# train / evaluate
# ---------------------------------------------------------------------------


def _grid_matrices(out_dir: str, config: PipelineConfig):
    """Deterministic (train, test) matrices for every weighting and source.

    One combined matrix is assembled and split per weighting; the three
    source variants are column selections of that split, so they share
    rows. The oversampler normally runs on each training slice only;
    with smote_before_split it runs once on the combined matrix, which
    deliberately reproduces the leakier ordering. Split and resampling
    seeds derive from the stage names, so train and evaluate rebuild
    the exact same partitions.
    """
    los = load_los_labels(out_dir)
    out = {}
    for weighting in WEIGHTINGS:
        diag_model = load_topic_model(out_dir, "diag", weighting)
        proc_model = load_topic_model(out_dir, "proc", weighting)
        matrix = assemble_features(
            _assignment_map(diag_model), _assignment_map(proc_model), los,
            mode=config.feature_mode,
        )
        if config.smote_before_split:
            matrix, _ = smote(
                matrix,
                SmoteConfig(k_neighbors=config.smote_k,
                            seed=derive_seed(config.seed, f"smote:{weighting}")),
            )
        train_m, test_m = stratified_split(
            matrix,
            SplitSpec(train_fraction=config.train_fraction,
                      seed=derive_seed(config.seed, f"split:{weighting}"),
                      stratified=config.stratified),
        )
        for source in ("diag", "proc", "both"):
            train_s = select_source(train_m, source)
            test_s = select_source(test_m, source)
            if not config.smote_before_split:
                train_s, _ = smote(
                    train_s,
                    SmoteConfig(k_neighbors=config.smote_k,
                                seed=derive_seed(config.seed, f"smote:{weighting}:{source}")),
                )
            out[(weighting, source)] = (train_s, test_s)
    return out


def _model_digests(out_dir: str) -> Dict[str, str]:
    digests = {}
    for source in SOURCES:
        for weighting in WEIGHTINGS:
            digests[f"in_model_{source}_{weighting}"] = file_digest(
                _path(out_dir, model_name(source, weighting))
            )
    return digests


def stage_train(out_dir: str, config: PipelineConfig) -> Dict[str, int]:
    """Train every classifier on every weighting and source combination."""
    matrices = _grid_matrices(out_dir, config)
    combos = {}
    for weighting in WEIGHTINGS:
        for source in ("diag", "proc", "both"):
            train_sm, test_m = matrices[(weighting, source)]
            models = {}
            for clf in CLASSIFIERS:
                seed = derive_seed(config.seed, f"train:{clf}:{weighting}:{source}")
                models[clf] = train(clf, train_sm, n_classes=N_CLASSES, seed=seed).to_dict()
            combos[f"{weighting}:{source}"] = {
                "n_train": len(train_sm.encounter_ids),
                "test_ids": list(test_m.encounter_ids),
                "models": models,
            }
    payload = {
        "in_cohort": file_digest(_path(out_dir, COHORT_TSV)),
        "seed": config.seed,
        "feature_mode": config.feature_mode,
        "train_fraction": config.train_fraction,
        "combos": combos,
    }
    payload.update(_model_digests(out_dir))
    write_json_artifact(_path(out_dir, CLASSIFIERS_JSON), "CLASSIFIERS", payload)
    return {"models": len(combos) * len(CLASSIFIERS)}


METRIC_KEYS = ("precision_macro", "recall_macro", "accuracy", "roc_auc_macro_ovr")


def stage_evaluate(out_dir: str, config: PipelineConfig) -> dict:
    """Score the stored models on their held-out rows; write the report."""
    stored = read_json_artifact(_path(out_dir, CLASSIFIERS_JSON), "CLASSIFIERS")
    expected = _model_digests(out_dir)
    expected["in_cohort"] = file_digest(_path(out_dir, COHORT_TSV))
    for key, digest in expected.items():
        if stored.get(key) != digest:
            raise DataError(
                f"{CLASSIFIERS_JSON} was trained against a different {key} "
                f"(recorded {stored.get(key)}, current {digest}); rerun train"
            )
    if stored.get("feature_mode") != config.feature_mode or stored.get("seed") != config.seed:
        raise DataError(
            f"{CLASSIFIERS_JSON} used seed={stored.get('seed')} mode={stored.get('feature_mode')!r}; "
            "evaluate must run with the same settings"
        )
    matrices = _grid_matrices(out_dir, config)
    grid: Dict[str, dict] = {}
    reports: Dict[str, dict] = {}
    best = None
    for weighting in WEIGHTINGS:
        grid[weighting] = {}
        reports[weighting] = {}
        for source in ("diag", "proc", "both"):
            combo = stored["combos"][f"{weighting}:{source}"]
            _train_sm, test_m = matrices[(weighting, source)]
            if list(test_m.encounter_ids) != combo["test_ids"]:
                raise InvariantViolation(
                    f"rebuilt test split for {weighting}:{source} does not match training time"
                )
            cell = {}
            detail = {}
            for clf in CLASSIFIERS:
                model = model_from_dict(combo["models"][clf])
                rep = evaluate(model, test_m, n_classes=N_CLASSES)
                cell[clf] = {k: rep.metrics()[k] for k in METRIC_KEYS}
                detail[clf] = rep.to_dict()
                if best is None or rep.accuracy > best["accuracy"]:
                    best = {
                        "weighting": weighting, "source": source, "classifier": clf,
                        "accuracy": rep.accuracy,
                    }
            grid[weighting][source] = cell
            reports[weighting][source] = detail
    n_test = {w: {s: len(matrices[(w, s)][1].encounter_ids) for s in ("diag", "proc", "both")}
              for w in WEIGHTINGS}
    payload = {
        "in_classifiers": file_digest(_path(out_dir, CLASSIFIERS_JSON)),
        "seed": config.seed,
        "feature_mode": config.feature_mode,
        "n_test": n_test,
        "grid": grid,
        "best": best,
        "reports": reports,
    }
    write_json_artifact(_path(out_dir, REPORT_JSON), "REPORT", payload)

    for source in SOURCES:
        model = load_topic_model(out_dir, source, config.weighting)
        lines = []
        for t in range(model.k()):
            for rank, (term, prob) in enumerate(top_keywords(model, t, config.top_n), start=1):
                lines.append(f"{t}\t{rank}\t{term}\t{prob!r}")
        write_artifact(
            _path(out_dir, topics_name(source)), "TOPICS",
            {
                "in_model": file_digest(_path(out_dir, model_name(source, config.weighting))),
                "source": source,
                "weighting": config.weighting,
                "k": str(model.k()),
                "top_n": str(config.top_n),
            },
            lines,
        )
        figs.save_topic_keywords(_path(out_dir, f"fig_topics_{source}.png"),
                                 model, source, top_n=config.top_n)

    label_counts: Dict[int, int] = {}
    for cat in load_los_labels(out_dir).values():
        label_counts[int(cat)] = label_counts.get(int(cat), 0) + 1
    figs.save_class_histogram(_path(out_dir, "fig_classes.png"), label_counts)
    figs.save_metrics_grid(_path(out_dir, "fig_metrics_accuracy.png"), grid, "accuracy")
    figs.save_metrics_grid(_path(out_dir, "fig_metrics_auc.png"), grid, "roc_auc_macro_ovr")
    return payload


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------


def stage_trajectory(out_dir: str, config: PipelineConfig,
                     patient: Optional[str] = None) -> int:
    """Chronological dominant topics per encounter for one or all patients."""
    _, cohort_rows = _read_cohort(out_dir)
    dataset = CohortDataset(encounters=[enc for enc, _, _ in cohort_rows])
    diag_assign = _assignment_map(load_topic_model(out_dir, "diag", config.weighting))
    proc_assign = _assignment_map(load_topic_model(out_dir, "proc", config.weighting))
    patients = [patient] if patient else sorted({e.patient_id for e in dataset.encounters})
    lines = []
    for pid in patients:
        for row in topic_trajectory(dataset, pid, diag_assign, proc_assign):
            cells = [
                row.patient_id, row.encounter_id, row.admit_date,
                "NA" if row.diag_topic is None else str(row.diag_topic),
                "NA" if row.diag_contribution is None else repr(row.diag_contribution),
                "NA" if row.proc_topic is None else str(row.proc_topic),
                "NA" if row.proc_contribution is None else repr(row.proc_contribution),
            ]
            lines.append("\t".join(cells))
    write_artifact(
        _path(out_dir, TRAJECTORY_TSV), "TRAJECTORY",
        {
            "in_cohort": file_digest(_path(out_dir, COHORT_TSV)),
            "in_model_diag": file_digest(_path(out_dir, model_name("diag", config.weighting))),
            "in_model_proc": file_digest(_path(out_dir, model_name("proc", config.weighting))),
            "weighting": config.weighting,
            "n_rows": str(len(lines)),
        },
        lines,
    )
    return len(lines)


# ---------------------------------------------------------------------------
# end to end
# ---------------------------------------------------------------------------


def stage_run(encounters_path: str, notes_path: str, ccsr_path: str,
              out_dir: str, config: PipelineConfig,
              gazetteer_path: Optional[str] = None) -> dict:
    """Everything from raw files to report.json in one call."""
    stage_ingest(encounters_path, notes_path, ccsr_path, out_dir)
    stage_preprocess(out_dir, gazetteer_path=gazetteer_path)
    stage_fit_topics(out_dir, config)
    stage_label(out_dir, config)
    stage_features(out_dir, config)
    stage_train(out_dir, config)
    return stage_evaluate(out_dir, config)
