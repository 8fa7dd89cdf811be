"""Annotation-native JSONL ingestion and deterministic splits.

The file contract is shared with the evaluation toolkit: one object per
line with id, text, spans [{start, end, category}], annotator. Offsets are
Unicode codepoints, half-open. Categories come from the closed 19-label
set.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

CATEGORIES = (
    "Name",
    "Birthdate",
    "Location",
    "Country",
    "Marital Status",
    "Religion",
    "Ethnicity/Race",
    "Gender",
    "Parenthood",
    "Age",
    "Sexuality",
    "Medical Information",
    "Employment",
    "Relationship",
    "Family",
    "Gender-Age",
    "Mental Health",
    "Physical Appearance",
    "Degree/Designation",
)

_CATEGORY_SET = set(CATEGORIES)


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    category: str


@dataclass
class Record:
    id: str
    text: str
    spans: list[Span]

    @property
    def labels(self) -> set[str]:
        """Post-level label set: the categories its spans disclose."""
        return {s.category for s in self.spans}


def load_records(path: str | Path) -> list[Record]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            raw = json.loads(line)
            spans = []
            for s in raw.get("spans", []):
                category = s["category"]
                if category not in _CATEGORY_SET:
                    raise ValueError(f"line {line_no}: unknown category {category!r}")
                if not 0 <= s["start"] < s["end"] <= len(raw["text"]):
                    raise ValueError(f"line {line_no}: span out of bounds")
                spans.append(Span(int(s["start"]), int(s["end"]), category))
            records.append(Record(id=str(raw["id"]), text=raw["text"], spans=spans))
    return records


def split_records(
    records: list[Record], split_fraction: float, split_seed: int
) -> tuple[list[Record], list[Record]]:
    """Deterministic shuffled train/test split; the parts are disjoint and
    cover the dataset."""
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must be in (0, 1)")
    indices = list(range(len(records)))
    random.Random(split_seed).shuffle(indices)
    cut = round(split_fraction * len(records))
    train_idx = sorted(indices[:cut])
    test_idx = sorted(indices[cut:])
    return [records[i] for i in train_idx], [records[i] for i in test_idx]
