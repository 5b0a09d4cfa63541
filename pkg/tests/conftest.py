"""Shared fixtures: compiled kernels warmed once, one small input bundle."""

import pytest

from phenomine import learn
from phenomine.config import PipelineConfig
from phenomine.synth import generate_cohort, generate_lda_corpus
from phenomine.topics import LdaConfig, fit_lda, infer_theta
from phenomine.vectorize import build_vocabulary, bow_vectors


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the jit kernels up front so timed tests measure the
    # algorithms, not compilation.
    learn.warmup()
    corpus = generate_lda_corpus(true_k=2, vocab_size=10, n_docs=4, doc_len=6, seed=0)
    docs = corpus.documents()
    vocab = build_vocabulary(docs)
    vectors = bow_vectors(docs, vocab)
    model = fit_lda(vectors, vocab, LdaConfig(k=2, iterations=3, burn_in=1, seed=0))
    infer_theta(model, vectors[0], sweeps=2)


@pytest.fixture(scope="session")
def bundle(tmp_path_factory):
    """Synthetic input bundle small enough for every pipeline test."""
    raw = tmp_path_factory.mktemp("bundle")
    # six diagnostic topics so the planted class map covers all five
    # stay-length bins with enough rows per class to split and resample
    manifest = generate_cohort(str(raw), n_encounters=80, k_diag=6, k_proc=6, seed=5)
    return {
        "dir": str(raw),
        "encounters": str(raw / "encounters.csv"),
        "notes": str(raw / "notes.jsonl"),
        "ccsr": str(raw / "ccsr.csv"),
        "gazetteer": str(raw / "gazetteer.txt"),
        "manifest": manifest,
    }


@pytest.fixture()
def fast_cfg():
    """Sampler settings that keep pipeline tests quick."""
    return PipelineConfig(seed=5, k_diag=4, k_proc=4, iterations=60, burn_in=40)
