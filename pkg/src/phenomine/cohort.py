"""Core domain types: encounters, notes, length-of-stay categories.

Length of stay is a calendar-day difference binned into five ordinal
categories. The bin edges are fixed; everything downstream (labels,
reports, figures) refers to categories through this module.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Tuple

from .errors import InvalidInterval


class LosCategory(IntEnum):
    """Ordinal stay-length classes. Codes double as label indices."""

    VERY_SHORT = 0   # 0-1 days
    SHORT = 1        # 2-7 days
    MEDIUM = 2       # 8-14 days
    LONG = 3         # 15-21 days
    VERY_LONG = 4    # 22 days and up

    @property
    def label(self) -> str:
        return _CATEGORY_LABELS[self]


_CATEGORY_LABELS = {
    LosCategory.VERY_SHORT: "VeryShort",
    LosCategory.SHORT: "Short",
    LosCategory.MEDIUM: "Medium",
    LosCategory.LONG: "Long",
    LosCategory.VERY_LONG: "VeryLong",
}

_LABEL_TO_CATEGORY = {v: k for k, v in _CATEGORY_LABELS.items()}

# Inclusive (lo, hi) day ranges; None means unbounded above.
LOS_BINS: Tuple[Tuple[int, int], ...] = ((0, 1), (2, 7), (8, 14), (15, 21), (22, None))


def category_from_label(label: str) -> LosCategory:
    """Inverse of LosCategory.label."""
    try:
        return _LABEL_TO_CATEGORY[label]
    except KeyError:
        raise ValueError(f"unknown length-of-stay label {label!r}") from None


@dataclass(frozen=True)
class Encounter:
    """One hospital admission with its diagnosis codes."""

    encounter_id: str
    patient_id: str
    admit_date: dt.date
    discharge_date: dt.date
    icd10_codes: Tuple[str, ...]


@dataclass(frozen=True)
class ProcedureNote:
    """Raw narrative attached to an encounter."""

    encounter_id: str
    text: str


@dataclass
class CohortDataset:
    """Parsed cohort: encounters in file order plus their notes.

    dropped_no_codes counts encounter rows discarded for an empty code
    field; orphan_notes counts notes whose encounter id matched nothing.
    """

    encounters: List[Encounter]
    notes_by_encounter: Dict[str, List[ProcedureNote]] = field(default_factory=dict)
    dropped_no_codes: int = 0
    orphan_notes: int = 0

    def encounter_ids(self) -> List[str]:
        return [e.encounter_id for e in self.encounters]

    def notes_for(self, encounter_id: str) -> List[ProcedureNote]:
        return self.notes_by_encounter.get(encounter_id, [])


def compute_los(admit: dt.date, discharge: dt.date) -> int:
    """Length of stay in whole calendar days. Same-day discharge is 0.

    Raises InvalidInterval when discharge precedes admission.
    """
    days = (discharge - admit).days
    if days < 0:
        raise InvalidInterval(
            f"discharge {discharge.isoformat()} precedes admission {admit.isoformat()}"
        )
    return days


def bin_los(days: int) -> LosCategory:
    """Map a non-negative day count onto its stay-length category."""
    if days < 0:
        raise InvalidInterval(f"negative length of stay: {days}")
    if days <= 1:
        return LosCategory.VERY_SHORT
    if days <= 7:
        return LosCategory.SHORT
    if days <= 14:
        return LosCategory.MEDIUM
    if days <= 21:
        return LosCategory.LONG
    return LosCategory.VERY_LONG


def class_histogram(labels) -> Dict[LosCategory, int]:
    """Count labels per category. Every category appears, zero or not."""
    counts = {cat: 0 for cat in LosCategory}
    for lab in labels:
        counts[LosCategory(lab)] += 1
    return counts
