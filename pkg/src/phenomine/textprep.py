"""Narrative preprocessing: phrase splitting, negation, entity filtering.

The chain for procedure text is

    extract_report_section -> split_phrases -> detect_negation
        -> entity_filter -> merge_encounter

Diagnostic category phrases skip negation and entity filtering (they are
already curated category names) and go straight to merge_encounter.

Negation is trigger-based. A pre-trigger ("no", "denies", ...) opens a
scope; the tokens that follow, up to scope_window of them, become the
negated concept. The scope closes early at a termination conjunction
("but", ...), at a clause-closing verb ("is", "seen", ...), at a comma,
or at another trigger. A negated concept renders as "no " + concept,
which keeps the negative finding as its own token sequence downstream.

The default stop-word list deliberately omits "no": stripping it would
erase rendered negations before the topic model ever sees them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources as importlib_resources
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

_PUNCT = ".,;:!?()[]{}'\"`"

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")

# Words trimmed from the open edges of split segments. Interior copies are
# kept, so "normal in size" survives while a trailing "with" does not.
_EDGE_TRIM = frozenset(
    """
    with and or of in on for to at by from there but however also
    is are was were be been being am has have had
    """.split()
)


class DocSource(Enum):
    """Which text stream an encounter document came from."""

    DIAGNOSTIC = "diag"
    PROCEDURE = "proc"


@dataclass(frozen=True)
class Phrase:
    """A clause-level text unit, possibly marked as a negated finding."""

    text: str
    negated: bool = False

    def rendered(self) -> str:
        return "no " + self.text if self.negated else self.text


@dataclass(frozen=True)
class EncounterDocument:
    """Token sequence for one encounter and one source."""

    encounter_id: str
    source: DocSource
    tokens: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class NegexLexicon:
    """Trigger vocabulary for negation detection.

    pre_triggers open a negation scope; termination_terms are
    conjunctions that close it and start a fresh affirmative segment;
    clause_closers are verbs that close it and swallow the rest of the
    clause ("is visualized" adds nothing once the finding is negated).
    """

    pre_triggers: Tuple[str, ...]
    termination_terms: Tuple[str, ...]
    clause_closers: FrozenSet[str]
    scope_window: int = 5

    # token-tuple forms, longest first, built once
    _trigger_seqs: Tuple[Tuple[str, ...], ...] = field(default=(), repr=False, compare=False)
    _termination_seqs: Tuple[Tuple[str, ...], ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.scope_window < 1:
            raise ValueError("scope_window must be at least 1")
        for name, entries in (("pre_triggers", self.pre_triggers),
                              ("termination_terms", self.termination_terms)):
            if not entries:
                raise ValueError(f"{name} must not be empty")
            for e in entries:
                if not e or e != e.lower():
                    raise ValueError(f"{name} entries must be non-empty lowercase: {e!r}")
        object.__setattr__(
            self, "_trigger_seqs",
            tuple(sorted((tuple(t.split()) for t in self.pre_triggers), key=len, reverse=True)),
        )
        object.__setattr__(
            self, "_termination_seqs",
            tuple(sorted((tuple(t.split()) for t in self.termination_terms), key=len, reverse=True)),
        )

    def trigger_len(self, tokens_lc: Sequence[str], i: int) -> int:
        """Length in tokens of the longest trigger starting at i, else 0."""
        for seq in self._trigger_seqs:
            if tuple(tokens_lc[i:i + len(seq)]) == seq:
                return len(seq)
        return 0

    def termination_len(self, tokens_lc: Sequence[str], i: int) -> int:
        for seq in self._termination_seqs:
            if tuple(tokens_lc[i:i + len(seq)]) == seq:
                return len(seq)
        return 0


DEFAULT_PRE_TRIGGERS = (
    "no", "denies", "denied", "without", "no evidence of",
    "without evidence of", "negative for", "free of", "absent",
)

DEFAULT_TERMINATION_TERMS = (
    "but", "however", "except", "aside from", "apart from",
    "although", "though", "yet", "whereas",
)

DEFAULT_CLAUSE_CLOSERS = frozenset(
    """
    is are was were am be been being has have had
    appears appeared remains remained noted seen visualized observed
    identified demonstrated appreciated detected found present evident
    persists reported shown suspected compared compares
    """.split()
)


@dataclass(frozen=True)
class DiseaseGazetteer:
    """Recognizer config: disease terms to keep, boilerplate to reject."""

    terms: Tuple[str, ...]
    stop_entities: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.terms:
            raise ValueError("gazetteer needs at least one term")
        object.__setattr__(self, "_term_re", _alternation(self.terms))
        object.__setattr__(
            self, "_stop_re", _alternation(self.stop_entities) if self.stop_entities else None
        )

    def keeps(self, rendered_text: str) -> bool:
        low = rendered_text.lower()
        stop_re = getattr(self, "_stop_re")
        if stop_re is not None and stop_re.search(low):
            return False
        return getattr(self, "_term_re").search(low) is not None


def _alternation(terms: Iterable[str]) -> re.Pattern:
    ordered = sorted({t.lower() for t in terms}, key=len, reverse=True)
    body = "|".join(re.escape(t) for t in ordered)
    return re.compile(r"\b(?:" + body + r")\b")


# ---------------------------------------------------------------------------
# phrase splitting and negation
# ---------------------------------------------------------------------------

_SPLIT_RE = re.compile(r"[.;\n]+")


def split_phrases(text: str) -> List[Phrase]:
    """Split narrative text on periods, semicolons and newlines."""
    out = []
    for chunk in _SPLIT_RE.split(text):
        chunk = chunk.strip()
        if chunk:
            out.append(Phrase(text=chunk))
    return out


def _trim_edges(tokens: List[str]) -> List[str]:
    start, end = 0, len(tokens)
    while start < end and tokens[start].lower() in _EDGE_TRIM:
        start += 1
    while end > start and tokens[end - 1].lower() in _EDGE_TRIM:
        end -= 1
    return tokens[start:end]


def detect_negation(phrase: Phrase, lexicon: NegexLexicon) -> List[Phrase]:
    """Split one phrase into negated concepts and affirmative remainders.

    A phrase with no trigger is returned unchanged. Rendering a negated
    result and running it back through produces identical text, so the
    pass is idempotent.
    """
    raw = phrase.text.split()
    clean = [t.strip(_PUNCT) for t in raw]
    lc = [t.lower() for t in clean]
    n = len(raw)
    comma_after = [t.rstrip().endswith((",", ";", ":")) for t in raw]

    if not any(lexicon.trigger_len(lc, j) for j in range(n)):
        return [phrase]

    out: List[Phrase] = []
    affirmative: List[str] = []

    def flush_affirmative():
        seg = _trim_edges([t for t in affirmative if t])
        if seg:
            out.append(Phrase(text=" ".join(seg), negated=False))
        affirmative.clear()

    i = 0
    while i < n:
        tlen = lexicon.trigger_len(lc, i)
        if tlen == 0:
            affirmative.append(clean[i])
            if comma_after[i]:
                flush_affirmative()
            i += 1
            continue

        flush_affirmative()
        i += tlen
        concept: List[str] = []
        closed = "end"
        while i < n:
            if len(concept) >= lexicon.scope_window:
                closed = "window"
                break
            if lexicon.trigger_len(lc, i):
                closed = "trigger"
                break
            term_len = lexicon.termination_len(lc, i)
            if term_len:
                closed = "termination"
                i += term_len
                break
            if lc[i] in lexicon.clause_closers:
                closed = "closer"
                break
            concept.append(clean[i])
            if comma_after[i]:
                closed = "comma"
                i += 1
                break
            i += 1

        if closed in ("closer", "window"):
            # the rest of this clause describes the negated finding; skip it
            while i < n:
                if lexicon.trigger_len(lc, i):
                    break
                term_len = lexicon.termination_len(lc, i)
                if term_len:
                    i += term_len
                    break
                stop_after = comma_after[i]
                i += 1
                if stop_after:
                    break

        concept = _trim_edges([t for t in concept if t])
        if concept:
            out.append(Phrase(text=" ".join(concept), negated=True))

    flush_affirmative()
    return out


def entity_filter(phrases: Sequence[Phrase], gazetteer: DiseaseGazetteer) -> List[Phrase]:
    """Keep phrases whose rendered text names a known term and no boilerplate."""
    return [p for p in phrases if gazetteer.keeps(p.rendered())]


# ---------------------------------------------------------------------------
# tokenization and per-encounter merge
# ---------------------------------------------------------------------------


def tokenize(text: str) -> List[str]:
    """Lowercase word tokens; internal hyphens kept, pure numbers dropped."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if any(c.isalpha() for c in t)]


def merge_encounter(
    note_phrases: Sequence[Sequence[Phrase]],
    encounter_id: str,
    source: DocSource,
    stopwords: FrozenSet[str],
) -> EncounterDocument:
    """Fold the kept phrases of every note into one token document.

    Rendered phrases are concatenated note by note; an exact rendered
    duplicate keeps only its first occurrence; tokens then lose stop
    words and numbers.
    """
    seen = set()
    tokens: List[str] = []
    for phrases in note_phrases:
        for p in phrases:
            r = p.rendered()
            if r in seen:
                continue
            seen.add(r)
            tokens.extend(t for t in tokenize(r) if t not in stopwords)
    return EncounterDocument(encounter_id=encounter_id, source=source, tokens=tuple(tokens))


# ---------------------------------------------------------------------------
# bundled lexicon resources
# ---------------------------------------------------------------------------


def _resource_path(name: str):
    return importlib_resources.files("phenomine").joinpath("resources", name)


def _read_sectioned(path_or_name, default_section: str) -> Dict[str, List[str]]:
    """Parse a one-entry-per-line file with optional [section] markers.

    Lines before any marker land in default_section, so a plain flat
    list file stays valid.
    """
    if hasattr(path_or_name, "read_text"):
        text = path_or_name.read_text(encoding="utf-8")
    else:
        with open(path_or_name, encoding="utf-8") as fh:
            text = fh.read()
    sections: Dict[str, List[str]] = {default_section: []}
    current = default_section
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = re.fullmatch(r"\[([a-z_]+)\]", line)
        if m:
            current = m.group(1)
            sections.setdefault(current, [])
            continue
        sections[current].append(line.lower())
    return sections


def load_stopwords(path: Optional[str] = None) -> FrozenSet[str]:
    source = path if path is not None else _resource_path("stopwords.txt")
    sections = _read_sectioned(source, "words")
    return frozenset(sections["words"])


def load_gazetteer(path: Optional[str] = None) -> DiseaseGazetteer:
    source = path if path is not None else _resource_path("gazetteer.txt")
    sections = _read_sectioned(source, "terms")
    return DiseaseGazetteer(
        terms=tuple(sections.get("terms", ())),
        stop_entities=tuple(sections.get("stop_entities", ())),
    )


def load_negex_lexicon(path: Optional[str] = None, scope_window: int = 5) -> NegexLexicon:
    source = path if path is not None else _resource_path("negex_triggers.txt")
    sections = _read_sectioned(source, "pre_triggers")
    closers = sections.get("clause_closers")
    return NegexLexicon(
        pre_triggers=tuple(sections.get("pre_triggers", ())),
        termination_terms=tuple(sections.get("termination", ())),
        clause_closers=frozenset(closers) if closers else DEFAULT_CLAUSE_CLOSERS,
        scope_window=scope_window,
    )


def default_negex_lexicon(scope_window: int = 5) -> NegexLexicon:
    return NegexLexicon(
        pre_triggers=DEFAULT_PRE_TRIGGERS,
        termination_terms=DEFAULT_TERMINATION_TERMS,
        clause_closers=DEFAULT_CLAUSE_CLOSERS,
        scope_window=scope_window,
    )
