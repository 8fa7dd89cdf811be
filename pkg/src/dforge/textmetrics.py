"""Surface-similarity metrics between source and synthetic texts.

All lexical metrics (BLEU, ROUGE-L, METEOR, TF-cosine) run on the module's
canonical tokenization so scores are comparable across the toolkit:
lowercase, split on Unicode whitespace, outer punctuation stripped per
token. Every scorer accepts either a raw string or a pre-tokenized list.

Embedding-based scores (bert_score, style_similarity) take vectors that an
:class:`~dforge.embeddings.EmbeddingProvider` produced; this module never
loads encoder weights itself.
"""

from __future__ import annotations

import math
import unicodedata
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

TokenSequence = list[str]
TextLike = Union[str, Sequence[str]]


def tokenize(text: str) -> TokenSequence:
    """Canonical tokenizer: lowercase, whitespace split, outer punctuation
    stripped from each token, empty tokens dropped.

    Internal punctuation survives, so "don't" stays one token.
    """
    out = []
    for raw in text.lower().split():
        tok = _strip_outer_punct(raw)
        if tok:
            out.append(tok)
    return out


def _strip_outer_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def _as_tokens(text: TextLike) -> TokenSequence:
    if isinstance(text, str):
        return tokenize(text)
    return list(text)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: TextLike,
    reference: TextLike,
    max_n: int = 3,
    smoothing_epsilon: float | None = None,
) -> float:
    """Sentence BLEU: geometric mean of modified n-gram precisions for
    n = 1..max_n times the brevity penalty min(1, exp(1 - r/c)).

    Unsmoothed by default: any zero precision zeroes the score. Passing
    ``smoothing_epsilon`` substitutes that value for zero numerators
    instead. Orders longer than the candidate are skipped so a short text
    still scores 1.0 against itself.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    if not cand or not ref:
        return 0.0
    log_sum = 0.0
    orders = min(max_n, len(cand))
    for n in range(1, orders + 1):
        counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        clipped = sum(min(c, ref_counts[g]) for g, c in counts.items())
        total = sum(counts.values())
        if clipped == 0:
            if smoothing_epsilon is None:
                return 0.0
            precision = smoothing_epsilon / total
        else:
            precision = clipped / total
        log_sum += math.log(precision)
    geo_mean = math.exp(log_sum / orders)
    brevity = min(1.0, math.exp(1.0 - len(ref) / len(cand)))
    return brevity * geo_mean


def rouge_l(candidate: TextLike, reference: TextLike) -> float:
    """ROUGE-L F-measure: P = LCS/|cand|, R = LCS/|ref|, F = 2PR/(P+R)."""
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(cand)
    r = lcs / len(ref)
    return 2 * p * r / (p + r)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Two-row DP keeps memory linear in the shorter sequence.
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, 1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def meteor(candidate: TextLike, reference: TextLike) -> float:
    """Exact-match METEOR (no stemming or synonymy).

    Unigram alignment maximizes matches and, among maximum alignments,
    minimizes chunks (ties resolved leftmost). Score = Fmean * (1 - penalty)
    with Fmean = 10PR/(R + 9P) and penalty = 0.5 * (chunks/matches)^3.
    """
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    if not cand or not ref:
        return 0.0
    matches, chunks = _alignment_stats(cand, ref)
    if matches == 0:
        return 0.0
    p = matches / len(cand)
    r = matches / len(ref)
    fmean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1 - penalty)


_ALIGN_NODE_BUDGET = 200_000


class _BudgetExceeded(Exception):
    pass


def _alignment_stats(cand: Sequence[str], ref: Sequence[str]) -> tuple[int, int]:
    """(matches, chunks) of the chunk-minimal maximum exact-match alignment.

    Chunk minimization over all maximum alignments is a set-partition
    search, so the exact branch runs under a node budget; inputs that blow
    past it fall back to a longest-common-tile greedy, which agrees with
    the exact answer except under adversarial token repetition.
    """
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    quota = {t: min(c, ref_counts[t]) for t, c in cand_counts.items() if t in ref_counts}
    matches = sum(quota.values())
    if matches == 0:
        return 0, 0
    try:
        chunks = _fewest_chunks_exact(cand, ref, quota)
    except _BudgetExceeded:
        chunks = _fewest_chunks_greedy(cand, ref, quota)
    return matches, chunks


def _fewest_chunks_exact(
    cand: Sequence[str], ref: Sequence[str], quota: dict[str, int]
) -> int:
    ref_slots = [j for j, tok in enumerate(ref) if tok in quota]
    if len(ref_slots) > 60:
        raise _BudgetExceeded
    bit_of = {j: 1 << b for b, j in enumerate(ref_slots)}
    type_mask: dict[str, int] = {}
    ref_occ: dict[str, list[int]] = {}
    for j in ref_slots:
        tok = ref[j]
        type_mask[tok] = type_mask.get(tok, 0) | bit_of[j]
        ref_occ.setdefault(tok, []).append(j)
    cand_occ: dict[str, list[int]] = {}
    for i, tok in enumerate(cand):
        if tok in quota:
            cand_occ.setdefault(tok, []).append(i)

    n = len(cand)
    memo: dict[tuple[int, int, int | None], int] = {}
    nodes = 0

    def dfs(i: int, mask: int, prev_j: int | None) -> int:
        nonlocal nodes
        if i == n:
            return 0
        key = (i, mask, prev_j)
        cached = memo.get(key)
        if cached is not None:
            return cached
        nodes += 1
        if nodes > _ALIGN_NODE_BUDGET:
            raise _BudgetExceeded
        tok = cand[i]
        best = math.inf
        if tok in quota:
            needed = quota[tok] - bin(mask & type_mask[tok]).count("1")
            if needed > 0:
                for j in ref_occ[tok]:
                    bit = bit_of[j]
                    if mask & bit:
                        continue
                    starts_chunk = 0 if prev_j is not None and j == prev_j + 1 else 1
                    cost = starts_chunk + dfs(i + 1, mask | bit, j)
                    if cost < best:
                        best = cost
            occ = cand_occ[tok]
            remaining_here = len(occ) - bisect_left(occ, i)
            if needed <= 0 or remaining_here - 1 >= needed:
                cost = dfs(i + 1, mask, None)
                if cost < best:
                    best = cost
        else:
            best = dfs(i + 1, mask, None)
        memo[key] = int(best)
        return int(best)

    return dfs(0, 0, None)


def _fewest_chunks_greedy(
    cand: Sequence[str], ref: Sequence[str], quota: dict[str, int]
) -> int:
    remaining = dict(quota)
    used_c = [False] * len(cand)
    used_r = [False] * len(ref)
    cand_occ: dict[str, list[int]] = {}
    ref_occ: dict[str, list[int]] = {}
    for i, tok in enumerate(cand):
        if tok in quota:
            cand_occ.setdefault(tok, []).append(i)
    for j, tok in enumerate(ref):
        if tok in quota:
            ref_occ.setdefault(tok, []).append(j)

    target = sum(quota.values())
    matched = 0
    chunks = 0
    while matched < target:
        best_len, best_i, best_j = 0, -1, -1
        for tok, needed in remaining.items():
            if needed <= 0:
                continue
            for i in cand_occ[tok]:
                if used_c[i]:
                    continue
                for j in ref_occ[tok]:
                    if used_r[j]:
                        continue
                    length = 0
                    tile_counts: dict[str, int] = {}
                    while (
                        i + length < len(cand)
                        and j + length < len(ref)
                        and not used_c[i + length]
                        and not used_r[j + length]
                        and cand[i + length] == ref[j + length]
                    ):
                        t = cand[i + length]
                        cnt = tile_counts.get(t, 0) + 1
                        if cnt > remaining.get(t, 0):
                            break
                        tile_counts[t] = cnt
                        length += 1
                    if length > best_len or (
                        length == best_len and length > 0 and (i, j) < (best_i, best_j)
                    ):
                        best_len, best_i, best_j = length, i, j
        for off in range(best_len):
            used_c[best_i + off] = True
            used_r[best_j + off] = True
            remaining[cand[best_i + off]] -= 1
        matched += best_len
        chunks += 1
    return chunks


def cosine_tf(candidate: TextLike, reference: TextLike) -> float:
    """Cosine of raw term-frequency vectors over the union vocabulary."""
    cand = Counter(_as_tokens(candidate))
    ref = Counter(_as_tokens(reference))
    if not cand or not ref:
        return 0.0
    dot = sum(c * ref[tok] for tok, c in cand.items() if tok in ref)
    if dot == 0:
        return 0.0
    # sqrt of the product keeps cosine(x, x) at exactly 1.0 for integer TFs.
    norm_sq = sum(c * c for c in cand.values()) * sum(c * c for c in ref.values())
    return dot / math.sqrt(norm_sq)


def divergence(source: TextLike, synthetic: TextLike) -> float:
    """Surface-form dissimilarity: 1 - BLEU-3 of the synthetic against its
    source. 0 means verbatim copy, 1 means no shared trigram structure."""
    return 1.0 - bleu(synthetic, source, 3)


def bert_score(cand_vectors, ref_vectors) -> tuple[float, float, float]:
    """Greedy max-cosine token matching over embedding vectors.

    precision = mean over candidate vectors of the best cosine against any
    reference vector; recall is the mirror image; F1 the harmonic mean.
    No idf weighting and no baseline rescaling.
    """
    cand = np.asarray(cand_vectors, dtype=float)
    ref = np.asarray(ref_vectors, dtype=float)
    if cand.ndim != 2 or ref.ndim != 2 or cand.shape[0] == 0 or ref.shape[0] == 0:
        raise ValueError("both vector lists must be non-empty 2-D arrays")
    if cand.shape[1] != ref.shape[1]:
        raise ValueError(
            f"dimension mismatch: {cand.shape[1]} vs {ref.shape[1]}"
        )
    sim = _unit_rows(cand) @ _unit_rows(ref).T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall <= 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)


def style_similarity(pooled_a, pooled_b) -> float:
    """Cosine between two pooled document embeddings, in [-1, 1]."""
    a = np.asarray(pooled_a, dtype=float).ravel()
    b = np.asarray(pooled_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0 or norm_b == 0:
        raise ValueError("style_similarity is undefined for zero-norm vectors")
    return float(a @ b) / (norm_a * norm_b)


@dataclass(frozen=True)
class SimilarityReport:
    """Per-pair score bundle for the ordered pair (candidate, reference).

    ``divergence`` is always exactly ``1 - bleu3``.
    """

    bleu3: float
    rouge_l_f: float
    meteor: float
    cosine: float
    divergence: float

    def to_dict(self, id: str | None = None) -> dict:
        row = {
            "bleu3": self.bleu3,
            "rouge_l": self.rouge_l_f,
            "meteor": self.meteor,
            "cosine": self.cosine,
            "divergence": self.divergence,
        }
        if id is not None:
            row = {"id": id, **row}
        return row


def pair_report(candidate: TextLike, reference: TextLike) -> SimilarityReport:
    """Bundle bleu3/rouge_l/meteor/cosine/divergence for one ordered pair.

    Callers scoring synthetic-vs-source pass the synthetic text as the
    candidate, so the divergence field reads as privacy gain.
    """
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    b3 = bleu(cand, ref, 3)
    return SimilarityReport(
        bleu3=b3,
        rouge_l_f=rouge_l(cand, ref),
        meteor=meteor(cand, ref),
        cosine=cosine_tf(cand, ref),
        divergence=1.0 - b3,
    )
