from pathlib import Path

import pytest

from phenomine.textprep import (
    DiseaseGazetteer,
    DocSource,
    NegexLexicon,
    Phrase,
    default_negex_lexicon,
    detect_negation,
    entity_filter,
    load_gazetteer,
    load_negex_lexicon,
    load_stopwords,
    merge_encounter,
    split_phrases,
    tokenize,
)

FIXTURE = Path(__file__).parent / "data" / "negation_fixture.tsv"


def run_sentence(sentence, lexicon):
    rendered = []
    for phrase in split_phrases(sentence):
        rendered.extend(p.rendered() for p in detect_negation(phrase, lexicon))
    return "; ".join(rendered)


def load_fixture():
    cases = []
    for line in FIXTURE.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        sentence, expected = line.split("\t")
        cases.append((sentence, expected))
    return cases


def test_fixture_has_sixty_sentences():
    assert len(load_fixture()) == 60


def test_negation_fixture_agreement():
    """At least 95% of the curated sentences must match expectations."""
    lexicon = default_negex_lexicon()
    cases = load_fixture()
    misses = [
        (s, exp, got)
        for s, exp in cases
        if (got := run_sentence(s, lexicon)) != exp
    ]
    agreement = 1.0 - len(misses) / len(cases)
    assert agreement >= 0.95, f"agreement {agreement:.2%}; first miss: {misses[0]}"


def test_pinned_rendering():
    lexicon = default_negex_lexicon()
    assert run_sentence("No pleural effusion is visualized.", lexicon) == "no pleural effusion"


def test_split_phrases():
    got = split_phrases("one. two;three\n four.. ")
    assert [p.text for p in got] == ["one", "two", "three", "four"]
    assert all(not p.negated for p in got)
    assert split_phrases("   ") == []


def test_tokenize():
    assert tokenize("ST-elevation noted, EF 55%.") == ["st-elevation", "noted", "ef"]
    assert tokenize("T2 12345") == ["t2"]
    assert tokenize("...") == []


def test_no_trigger_phrase_passes_through():
    lexicon = default_negex_lexicon()
    phrase = Phrase(text="mild cardiomegaly")
    assert detect_negation(phrase, lexicon) == [phrase]


def test_negation_idempotent():
    # feed every fixture output back through the detector; rendered text
    # must survive a second pass unchanged
    lexicon = default_negex_lexicon()
    for sentence, _ in load_fixture():
        once = run_sentence(sentence, lexicon)
        assert run_sentence(once, lexicon) == once, sentence


def test_scope_window_truncates():
    lexicon = default_negex_lexicon(scope_window=2)
    got = detect_negation(Phrase(text="no large left sided effusion"), lexicon)
    assert [p.rendered() for p in got] == ["no large left"]


def test_longest_trigger_wins():
    lexicon = default_negex_lexicon()
    got = detect_negation(Phrase(text="no evidence of infection"), lexicon)
    assert [(p.text, p.negated) for p in got] == [("infection", True)]


def test_comma_closes_scope():
    lexicon = default_negex_lexicon()
    got = detect_negation(Phrase(text="no effusion, mild edema"), lexicon)
    assert [p.rendered() for p in got] == ["no effusion", "mild edema"]


def test_lexicon_validation():
    with pytest.raises(ValueError):
        NegexLexicon(pre_triggers=(), termination_terms=("but",),
                     clause_closers=frozenset())
    with pytest.raises(ValueError):
        NegexLexicon(pre_triggers=("No",), termination_terms=("but",),
                     clause_closers=frozenset())
    with pytest.raises(ValueError):
        default_negex_lexicon(scope_window=0)


def test_entity_filter():
    gaz = DiseaseGazetteer(
        terms=("pneumonia", "pleural effusion"),
        stop_entities=("electronically signed",),
    )
    phrases = [
        Phrase(text="right lower lobe pneumonia"),
        Phrase(text="pleural effusion", negated=True),
        Phrase(text="lines and tubes unchanged"),
        Phrase(text="pneumonia report electronically signed"),
    ]
    kept = entity_filter(phrases, gaz)
    assert [p.rendered() for p in kept] == [
        "right lower lobe pneumonia", "no pleural effusion",
    ]


def test_gazetteer_matches_whole_words():
    gaz = DiseaseGazetteer(terms=("edema",))
    assert gaz.keeps("interstitial edema")
    assert not gaz.keeps("edematous changes")


def test_gazetteer_needs_terms():
    with pytest.raises(ValueError):
        DiseaseGazetteer(terms=())


def test_merge_encounter():
    notes = [
        [Phrase(text="Pleural Effusion", negated=True), Phrase(text="mild edema of 2")],
        [Phrase(text="Pleural Effusion", negated=True), Phrase(text="clear lungs")],
    ]
    doc = merge_encounter(notes, "e1", DocSource.PROCEDURE, stopwords=frozenset({"of"}))
    # the duplicated negative finding appears once; 'of' and the number drop
    assert doc.tokens == ("no", "pleural", "effusion", "mild", "edema", "clear", "lungs")
    assert doc.encounter_id == "e1"
    assert doc.source is DocSource.PROCEDURE
    assert len(doc) == 7


def test_bundled_resources_load():
    stops = load_stopwords()
    assert "the" in stops
    # "no" must never be a stop word: it carries the rendered negations
    assert "no" not in stops
    gaz = load_gazetteer()
    assert gaz.keeps("no pleural effusion")
    lexicon = load_negex_lexicon()
    assert "no" in lexicon.pre_triggers
    assert lexicon.termination_len(["but"], 0) == 1
