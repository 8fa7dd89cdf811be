"""Evaluation of PII classifier/tagger predictions and cross-corpus
distribution comparison. Consumes prediction files produced by any
model trainer that writes the documented JSONL schemas.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .annotation import AnnotatedPost, PiiCategory, PiiSpan, category_proportions, parse_category


@dataclass
class MultilabelExample:
    id: str
    gold: set[PiiCategory]
    pred: set[PiiCategory]


@dataclass
class TokenPrediction:
    id: str
    tokens: list[str]
    gold_labels: list[set[PiiCategory]]
    pred_labels: list[set[PiiCategory]]

    def __post_init__(self):
        if len(self.gold_labels) != len(self.tokens) or len(self.pred_labels) != len(self.tokens):
            raise ValueError(
                f"record {self.id!r}: label lists must match token count "
                f"({len(self.tokens)} tokens)"
            )


def load_multilabel_jsonl(path: str | Path) -> list[MultilabelExample]:
    """Read {"id", "gold": [...], "pred": [...]} records."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                MultilabelExample(
                    id=str(rec["id"]),
                    gold={parse_category(c) for c in rec["gold"]},
                    pred={parse_category(c) for c in rec["pred"]},
                )
            )
    return out


def load_token_jsonl(path: str | Path) -> list[TokenPrediction]:
    """Read {"id", "tokens", "gold": [[...]], "pred": [[...]]} records."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                TokenPrediction(
                    id=str(rec["id"]),
                    tokens=list(rec["tokens"]),
                    gold_labels=[{parse_category(c) for c in labels} for labels in rec["gold"]],
                    pred_labels=[{parse_category(c) for c in labels} for labels in rec["pred"]],
                )
            )
    return out


def multilabel_metrics(
    examples: Sequence[MultilabelExample], average: str = "micro"
) -> dict[str, float]:
    """Subset accuracy plus averaged precision/recall/F1.

    ``micro`` (the default) pools label instances across categories;
    ``macro`` averages per-category scores over categories with any gold or
    predicted instance; ``samples`` averages per-example scores (an example
    with empty gold and pred counts as fully correct).
    """
    if not examples:
        raise ValueError("no examples to evaluate")
    if average not in ("micro", "macro", "samples"):
        raise ValueError(f"unknown averaging mode: {average!r}")
    exact = sum(1 for ex in examples if ex.pred == ex.gold)
    out = {"subset_accuracy": exact / len(examples)}

    if average == "micro":
        tp = sum(len(ex.pred & ex.gold) for ex in examples)
        fp = sum(len(ex.pred - ex.gold) for ex in examples)
        fn = sum(len(ex.gold - ex.pred) for ex in examples)
        scores = _prf(tp, n_pred=tp + fp, n_gold=tp + fn)
    elif average == "macro":
        per_cat = []
        seen = {c for ex in examples for c in ex.gold | ex.pred}
        for cat in seen:
            tp = sum(1 for ex in examples if cat in ex.gold and cat in ex.pred)
            n_pred = sum(1 for ex in examples if cat in ex.pred)
            n_gold = sum(1 for ex in examples if cat in ex.gold)
            per_cat.append(_prf(tp, n_pred=n_pred, n_gold=n_gold))
        scores = {
            key: sum(s[key] for s in per_cat) / len(per_cat) if per_cat else 0.0
            for key in ("precision", "recall", "f1")
        }
    else:
        per_ex = []
        for ex in examples:
            if not ex.gold and not ex.pred:
                per_ex.append({"precision": 1.0, "recall": 1.0, "f1": 1.0})
            else:
                per_ex.append(_prf(len(ex.gold & ex.pred), n_pred=len(ex.pred), n_gold=len(ex.gold)))
        scores = {
            key: sum(s[key] for s in per_ex) / len(per_ex) for key in ("precision", "recall", "f1")
        }

    out[f"{average}_precision"] = scores["precision"]
    out[f"{average}_recall"] = scores["recall"]
    out[f"{average}_f1"] = scores["f1"]
    return out


def token_macro_f1(predictions: Sequence[TokenPrediction]) -> float:
    """Macro-averaged token-level F1 over categories with at least one
    gold-positive token. A token is positive for a category when the
    category is in its label set."""
    tp: dict[PiiCategory, int] = {}
    fp: dict[PiiCategory, int] = {}
    fn: dict[PiiCategory, int] = {}
    gold_seen: set[PiiCategory] = set()
    for rec in predictions:
        for gold, pred in zip(rec.gold_labels, rec.pred_labels):
            gold_seen.update(gold)
            for cat in gold | pred:
                if cat in gold and cat in pred:
                    tp[cat] = tp.get(cat, 0) + 1
                elif cat in pred:
                    fp[cat] = fp.get(cat, 0) + 1
                else:
                    fn[cat] = fn.get(cat, 0) + 1
    if not gold_seen:
        raise ValueError("no gold-positive tokens in any category")
    scores = []
    for cat in gold_seen:
        t, f_p, f_n = tp.get(cat, 0), fp.get(cat, 0), fn.get(cat, 0)
        p = t / (t + f_p) if t + f_p else 0.0
        r = t / (t + f_n) if t + f_n else 0.0
        scores.append(2 * p * r / (p + r) if p + r else 0.0)
    return sum(scores) / len(scores)


def span_f1_partial(
    gold_spans: Sequence[PiiSpan],
    pred_spans: Sequence[PiiSpan],
    min_overlap: float = 0.5,
) -> dict[str, float]:
    """Span-level P/R/F1 with partial matching.

    A predicted span is a true positive when some unmatched gold span of
    the same category is covered at least min_overlap, measured as
    intersection over the gold span's length (boundary inclusive).
    Matching is greedy one-to-one in offset order.
    """
    if not 0 < min_overlap <= 1:
        raise ValueError("min_overlap must be in (0, 1]")
    if not gold_spans and not pred_spans:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    tp = _count_partial_matches(gold_spans, pred_spans, min_overlap)
    return _prf(tp, n_pred=len(pred_spans), n_gold=len(gold_spans))


def _count_partial_matches(
    gold_spans: Sequence[PiiSpan], pred_spans: Sequence[PiiSpan], min_overlap: float
) -> int:
    gold = sorted(gold_spans, key=lambda s: (s.start, s.end))
    pred = sorted(pred_spans, key=lambda s: (s.start, s.end))
    taken = [False] * len(gold)
    tp = 0
    for p in pred:
        for j, g in enumerate(gold):
            if taken[j] or g.category != p.category:
                continue
            inter = min(g.end, p.end) - max(g.start, p.start)
            if inter / g.length() >= min_overlap:
                taken[j] = True
                tp += 1
                break
    return tp


def _prf(tp: int, n_pred: int, n_gold: int) -> dict[str, float]:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def span_f1_partial_corpus(
    pairs: Iterable[tuple[Sequence[PiiSpan], Sequence[PiiSpan]]],
    min_overlap: float = 0.5,
) -> dict[str, float]:
    """Corpus-level partial span F1: per-document greedy matching with
    TP/FP/FN pooled before computing P/R/F1."""
    if not 0 < min_overlap <= 1:
        raise ValueError("min_overlap must be in (0, 1]")
    tp = n_pred = n_gold = 0
    for gold_spans, pred_spans in pairs:
        tp += _count_partial_matches(gold_spans, pred_spans, min_overlap)
        n_pred += len(pred_spans)
        n_gold += len(gold_spans)
    if n_pred == 0 and n_gold == 0:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    return _prf(tp, n_pred=n_pred, n_gold=n_gold)


@dataclass
class ProportionComparison:
    """Per-category PII proportions of two corpora plus residuals
    (synthetic minus original)."""

    rows: list[tuple[PiiCategory, float, float, float]]
    max_abs_deviation: float

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["category", "original", "synthetic", "residual"])
            for cat, orig, synth, residual in self.rows:
                writer.writerow([cat.value, f"{orig:.6f}", f"{synth:.6f}", f"{residual:.6f}"])

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "category": cat.value,
                    "original": orig,
                    "synthetic": synth,
                    "residual": residual,
                }
                for cat, orig, synth, residual in self.rows
            ],
            "max_abs_deviation": self.max_abs_deviation,
        }


def proportion_comparison(
    original_corpus: Sequence[AnnotatedPost],
    synthetic_corpus: Sequence[AnnotatedPost],
) -> ProportionComparison:
    """Compare per-category span proportions between two corpora.

    Categories absent from one corpus enter with proportion 0, so residuals
    always sum to ~0.
    """
    orig = category_proportions(original_corpus)
    synth = category_proportions(synthetic_corpus)
    rows = []
    for cat in PiiCategory:
        if cat not in orig and cat not in synth:
            continue
        o = orig.get(cat, 0.0)
        s = synth.get(cat, 0.0)
        rows.append((cat, o, s, s - o))
    max_abs = max(abs(r[3]) for r in rows)
    return ProportionComparison(rows=rows, max_abs_deviation=max_abs)
