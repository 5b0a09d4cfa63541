"""Readers for the three cohort input files plus report-section extraction.

Input formats:

  encounters.csv  header: encounter_id,patient_id,admit_date,discharge_date,icd10_codes
                  dates ISO (YYYY-MM-DD), codes ';'-separated, may be empty
  notes.jsonl     one JSON object per line: {"encounter_id": ..., "text": ...}
  ccsr.csv        header: icd10_code,ccsr_description

Rows with an empty code field are dropped and counted rather than treated
as errors; everything structurally wrong raises a DataError subclass that
names the file and line.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .cohort import CohortDataset, Encounter, ProcedureNote, compute_los
from .errors import (
    BadDate,
    DuplicateEncounter,
    EmptyFile,
    SchemaError,
)

log = logging.getLogger(__name__)

ENCOUNTER_HEADER = ["encounter_id", "patient_id", "admit_date", "discharge_date", "icd10_codes"]
CCSR_HEADER = ["icd10_code", "ccsr_description"]

# Section headers we are willing to keep, in preference order.
SECTION_PREFERENCE = ("IMPRESSION", "CONCLUSION", "FINDINGS")

# Recognized headers start a line and end with a colon; matching only at
# line start keeps in-sentence words like "impressions" from splitting text.
_HEADER_RE = re.compile(
    r"^[ \t]*(impression|conclusion|findings)[ \t]*:",
    re.IGNORECASE | re.MULTILINE,
)


def _parse_iso_date(value: str, path: str, line_no: int, field: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value.strip())
    except ValueError:
        raise BadDate(f"{path}:{line_no}: field {field} is not an ISO date: {value!r}") from None


def parse_encounters(path: str) -> CohortDataset:
    """Read encounters.csv into a CohortDataset (notes attached separately).

    Rows whose code field is empty are dropped and counted in
    dropped_no_codes. Duplicate encounter ids are an error. Discharge
    before admission is an error (raised by compute_los).
    """
    encounters: List[Encounter] = []
    seen = set()
    dropped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header line") from None
        if [h.strip() for h in header] != ENCOUNTER_HEADER:
            raise SchemaError(f"{path}: expected header {ENCOUNTER_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(ENCOUNTER_HEADER):
                raise SchemaError(f"{path}:{line_no}: expected {len(ENCOUNTER_HEADER)} fields, got {len(row)}")
            enc_id, patient_id, admit_raw, disch_raw, codes_raw = [f.strip() for f in row]
            if not enc_id or not patient_id:
                raise SchemaError(f"{path}:{line_no}: empty encounter_id or patient_id")
            if enc_id in seen:
                raise DuplicateEncounter(f"{path}:{line_no}: duplicate encounter_id {enc_id!r}")
            seen.add(enc_id)
            codes = tuple(c.strip() for c in codes_raw.split(";") if c.strip())
            if not codes:
                dropped += 1
                continue
            admit = _parse_iso_date(admit_raw, path, line_no, "admit_date")
            discharge = _parse_iso_date(disch_raw, path, line_no, "discharge_date")
            compute_los(admit, discharge)  # validates the interval
            encounters.append(Encounter(enc_id, patient_id, admit, discharge, codes))
    if not encounters and dropped == 0:
        raise EmptyFile(f"{path}: no data rows")
    return CohortDataset(encounters=encounters, dropped_no_codes=dropped)


def load_notes(path: str, dataset: CohortDataset) -> CohortDataset:
    """Attach notes.jsonl contents to an existing dataset in file order.

    Notes referencing unknown encounters are skipped and counted in
    orphan_notes.
    """
    known = set(dataset.encounter_ids())
    grouped: Dict[str, List[ProcedureNote]] = {}
    orphans = 0
    n_lines = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            n_lines += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise SchemaError(f"{path}:{line_no}: invalid JSON") from None
            if not isinstance(obj, dict) or "encounter_id" not in obj or "text" not in obj:
                raise SchemaError(f"{path}:{line_no}: need encounter_id and text fields")
            enc_id = str(obj["encounter_id"])
            text = str(obj["text"])
            if enc_id not in known:
                orphans += 1
                continue
            grouped.setdefault(enc_id, []).append(ProcedureNote(enc_id, text))
    if n_lines == 0:
        raise EmptyFile(f"{path}: no note records")
    dataset.notes_by_encounter = grouped
    dataset.orphan_notes = orphans
    return dataset


def normalize_code(code: str) -> str:
    """Canonical form for a diagnosis code: dots stripped, uppercased."""
    return code.replace(".", "").strip().upper()


def load_ccsr_map(path: str) -> Dict[str, str]:
    """Read the code -> category description map, keyed by normalized code.

    Keys are normalized so lookups ignore case and dotted formatting
    ("i10.9" and "I109" hit the same row). A code listed twice keeps its
    last description; each override is logged so dirty exports are
    visible without failing the run.
    """
    mapping: Dict[str, str] = {}
    overrides = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header line") from None
        if [h.strip() for h in header] != CCSR_HEADER:
            raise SchemaError(f"{path}: expected header {CCSR_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}:{line_no}: expected 2 fields, got {len(row)}")
            code, desc = normalize_code(row[0]), row[1].strip()
            if not code or not desc:
                raise SchemaError(f"{path}:{line_no}: empty code or description")
            if code in mapping:
                overrides += 1
            mapping[code] = desc
    if not mapping:
        raise EmptyFile(f"{path}: no code rows")
    if overrides:
        log.warning("%s: %d duplicate code rows, later rows kept", path, overrides)
    return mapping


def codes_to_text(codes, ccsr_map: Dict[str, str]) -> Tuple[List[str], int]:
    """Translate diagnosis codes into lowercased category phrases.

    Unknown codes are skipped and counted. The category whose whole text
    is 'heart failure' is removed: in a cohort selected on that condition
    it appears everywhere and carries no contrast.
    """
    phrases: List[str] = []
    unknown = 0
    for code in codes:
        desc = ccsr_map.get(normalize_code(code))
        if desc is None:
            unknown += 1
            continue
        phrase = desc.strip().lower()
        if phrase == "heart failure":
            continue
        if phrase:
            phrases.append(phrase)
    return phrases, unknown


@dataclass(frozen=True)
class SectionExtraction:
    """A kept narrative section: which header won and its body text."""

    header: str
    text: str


def extract_report_section(text: str) -> Optional[SectionExtraction]:
    """Pull the most conclusion-like section out of a raw note.

    Preference order is IMPRESSION, then CONCLUSION, then FINDINGS. A
    section runs from its header colon to the next recognized header or
    the end of the note. Notes with none of the three headers return None
    and are discarded upstream.
    """
    matches = list(_HEADER_RE.finditer(text))
    if not matches:
        return None
    sections: Dict[str, str] = {}
    for i, m in enumerate(matches):
        name = m.group(1).upper()
        start = m.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        body = text[start:end].strip()
        if name not in sections and body:
            sections[name] = body
    for wanted in SECTION_PREFERENCE:
        if wanted in sections:
            return SectionExtraction(header=wanted, text=sections[wanted])
    return None
