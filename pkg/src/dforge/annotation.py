"""PII span annotation model: taxonomy, imports, agreement, and corpus stats.

Offsets are Unicode codepoint positions into the host text, half-open
[start, end). Annotation exports from span-labeling tools (Doccano-style
JSONL) and the toolkit's native JSONL are both importable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class PiiCategory(Enum):
    """Closed set of 19 self-disclosure categories.

    Values are the stable serialized labels; compact alias forms (for
    example "MaritalStatus") are accepted on input.
    """

    NAME = "Name"
    BIRTHDATE = "Birthdate"
    LOCATION = "Location"
    COUNTRY = "Country"
    MARITAL_STATUS = "Marital Status"
    RELIGION = "Religion"
    ETHNICITY_RACE = "Ethnicity/Race"
    GENDER = "Gender"
    PARENTHOOD = "Parenthood"
    AGE = "Age"
    SEXUALITY = "Sexuality"
    MEDICAL_INFORMATION = "Medical Information"
    EMPLOYMENT = "Employment"
    RELATIONSHIP = "Relationship"
    FAMILY = "Family"
    GENDER_AGE = "Gender-Age"
    MENTAL_HEALTH = "Mental Health"
    PHYSICAL_APPEARANCE = "Physical Appearance"
    DEGREE_DESIGNATION = "Degree/Designation"

    def __str__(self) -> str:
        return self.value


def _canon(label: str) -> str:
    return re.sub(r"[^a-z0-9]", "", label.lower())


_CATEGORY_BY_CANON = {_canon(c.value): c for c in PiiCategory}


class UnknownCategoryError(ValueError):
    pass


def parse_category(label: str) -> PiiCategory:
    """Resolve a serialized label (canonical or compact alias) to a category."""
    cat = _CATEGORY_BY_CANON.get(_canon(label))
    if cat is None:
        raise UnknownCategoryError(f"unknown PII category: {label!r}")
    return cat


@dataclass(frozen=True, order=True)
class PiiSpan:
    """Half-open character interval [start, end) with one PII category."""

    start: int
    end: int
    category: PiiCategory = field(compare=False)

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValueError(f"invalid span offsets: [{self.start}, {self.end})")

    def length(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "category": self.category.value}


@dataclass
class AnnotatedPost:
    """One text with its labeled spans; the spans list may be empty."""

    id: str
    text: str
    spans: list[PiiSpan]
    annotator: str = ""

    def __post_init__(self):
        for span in self.spans:
            if span.end > len(self.text):
                raise ValueError(
                    f"span [{span.start}, {span.end}) out of bounds for "
                    f"post {self.id!r} (text length {len(self.text)})"
                )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "spans": [s.to_dict() for s in self.spans],
            "annotator": self.annotator,
        }


class AnnotationFormatError(ValueError):
    pass


def import_annotations(path: str | Path, schema: str = "doccano") -> list[AnnotatedPost]:
    """Load annotated posts from JSONL.

    ``doccano`` schema: {"text": ..., "label": [[start, end, category], ...]}
    with an optional "id". ``native`` schema: the toolkit's own export
    ({"id", "text", "spans": [{"start","end","category"}], "annotator"}).
    Spans are bounds-checked and categories resolved; violations raise with
    the offending record index.
    """
    if schema not in ("doccano", "native"):
        raise ValueError(f"unknown annotation schema: {schema!r}")
    posts = []
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationFormatError(f"record {index}: invalid JSON ({exc})") from exc
            try:
                if schema == "doccano":
                    posts.append(_from_doccano(record, index))
                else:
                    posts.append(_from_native(record))
            except (ValueError, KeyError, TypeError) as exc:
                raise AnnotationFormatError(f"record {index}: {exc}") from exc
    return posts


def _from_doccano(record: dict, index: int) -> AnnotatedPost:
    text = record["text"]
    spans = [
        PiiSpan(int(start), int(end), parse_category(label))
        for start, end, label in record.get("label", [])
    ]
    return AnnotatedPost(
        id=str(record.get("id", index)),
        text=text,
        spans=spans,
        annotator=str(record.get("annotator", "")),
    )


def _from_native(record: dict) -> AnnotatedPost:
    spans = [
        PiiSpan(int(s["start"]), int(s["end"]), parse_category(s["category"]))
        for s in record.get("spans", [])
    ]
    return AnnotatedPost(
        id=str(record["id"]),
        text=record["text"],
        spans=spans,
        annotator=str(record.get("annotator", "")),
    )


def export_annotations(posts: Iterable[AnnotatedPost], path: str | Path) -> None:
    """Write posts in the native JSONL schema."""
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(json.dumps(post.to_dict(), ensure_ascii=False) + "\n")


def spans_match(a: PiiSpan, b: PiiSpan) -> bool:
    """Partial-span agreement: same category and overlapping character
    intervals. Half-open intervals that merely touch do not overlap."""
    return a.category == b.category and a.start < b.end and b.start < a.end


@dataclass(frozen=True)
class IaaReport:
    pairwise_f1: float
    mean_overlap_fraction: float
    matched_pairs: int
    spans_a: int
    spans_b: int

    def to_dict(self) -> dict:
        return {
            "pairwise_f1": self.pairwise_f1,
            "mean_overlap_fraction": self.mean_overlap_fraction,
            "matched_pairs": self.matched_pairs,
            "spans_a": self.spans_a,
            "spans_b": self.spans_b,
        }


def pairwise_f1(
    ann_a: Sequence[AnnotatedPost], ann_b: Sequence[AnnotatedPost]
) -> IaaReport:
    """Pairwise span F1 between two annotators over the same posts.

    Matching is greedy one-to-one per post: A's spans in offset order each
    take the first unmatched B span that overlaps with the same label.
    F1 = 2 * matches / (|A| + |B|). The overlap fraction of a matched pair
    is character-interval Jaccard (intersection over union); the report
    carries its mean. Two empty annotation sets count as full agreement.
    """
    by_id_a = {p.id: p for p in ann_a}
    by_id_b = {p.id: p for p in ann_b}
    if set(by_id_a) != set(by_id_b):
        missing = set(by_id_a) ^ set(by_id_b)
        raise ValueError(f"annotator sets cover different post ids: {sorted(missing)[:5]}")

    matched = 0
    total_a = 0
    total_b = 0
    overlaps: list[float] = []
    for post_id in by_id_a:
        spans_a = sorted(by_id_a[post_id].spans, key=lambda s: (s.start, s.end))
        spans_b = sorted(by_id_b[post_id].spans, key=lambda s: (s.start, s.end))
        total_a += len(spans_a)
        total_b += len(spans_b)
        taken = [False] * len(spans_b)
        for a in spans_a:
            for j, b in enumerate(spans_b):
                if taken[j] or not spans_match(a, b):
                    continue
                taken[j] = True
                matched += 1
                overlaps.append(_interval_jaccard(a, b))
                break

    denom = total_a + total_b
    f1 = 2 * matched / denom if denom else 1.0
    mean_overlap = sum(overlaps) / len(overlaps) if overlaps else 0.0
    return IaaReport(
        pairwise_f1=f1,
        mean_overlap_fraction=mean_overlap,
        matched_pairs=matched,
        spans_a=total_a,
        spans_b=total_b,
    )


def _interval_jaccard(a: PiiSpan, b: PiiSpan) -> float:
    inter = min(a.end, b.end) - max(a.start, b.start)
    union = a.length() + b.length() - inter
    return inter / union


def category_stats(
    corpus: Iterable[AnnotatedPost],
) -> dict[PiiCategory, tuple[int, float | None]]:
    """Span count and mean character length per category, across all 19
    categories. Zero-span categories report (0, None)."""
    counts = {cat: 0 for cat in PiiCategory}
    lengths = {cat: 0 for cat in PiiCategory}
    for post in corpus:
        for span in post.spans:
            counts[span.category] += 1
            lengths[span.category] += span.length()
    return {
        cat: (counts[cat], lengths[cat] / counts[cat] if counts[cat] else None)
        for cat in PiiCategory
    }


def category_proportions(corpus: Iterable[AnnotatedPost]) -> dict[PiiCategory, float]:
    """Share of total spans per category, over categories that occur.

    Raises on a corpus without any spans.
    """
    counts: dict[PiiCategory, int] = {}
    total = 0
    for post in corpus:
        for span in post.spans:
            counts[span.category] = counts.get(span.category, 0) + 1
            total += 1
    if total == 0:
        raise ValueError("corpus contains no spans")
    return {cat: n / total for cat, n in counts.items()}
