"""Raw post ingestion and the filtering cascade that produces the
annotation-ready corpus: NSFW blocklist, first-person retention, minimum
length, deterministic fractional sampling.

Filters are pure functions; each returns an order-preserving subsequence
of its input, so the pipeline is safe to re-run and to call concurrently.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_PRONOUN_LEXICON = ("i", "me", "myself", "my", "mine", "we", "us", "our", "ours")

SAMPLER_ALGORITHM = "mt19937-index-sample"


@dataclass(frozen=True)
class Post:
    id: str
    author: str
    subreddit: str
    text: str
    created_at: datetime | None = None
    kind: str = "post"
    over_18: bool | None = None

    def to_dict(self) -> dict:
        row = {
            "id": self.id,
            "author": self.author,
            "subreddit": self.subreddit,
            "text": self.text,
        }
        if self.created_at is not None:
            row["created_at"] = self.created_at.isoformat()
        if self.kind != "post":
            row["kind"] = self.kind
        if self.over_18 is not None:
            row["over_18"] = self.over_18
        return row


@dataclass(frozen=True)
class FilterConfig:
    nsfw_subreddits: frozenset[str] = frozenset()
    pronoun_lexicon: tuple[str, ...] = DEFAULT_PRONOUN_LEXICON
    min_words: int = 3
    sample_fraction: float = 0.05
    sample_seed: int = 0

    def __post_init__(self):
        if not self.pronoun_lexicon:
            raise ValueError("pronoun_lexicon must be non-empty")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must be in (0, 1]")
        if self.min_words < 1:
            raise ValueError("min_words must be >= 1")
        # Blocklist and lexicon matching is defined on lowercase forms.
        object.__setattr__(
            self, "nsfw_subreddits", frozenset(s.lower() for s in self.nsfw_subreddits)
        )
        object.__setattr__(
            self, "pronoun_lexicon", tuple(w.lower() for w in self.pronoun_lexicon)
        )


@dataclass
class LedgerStage:
    stage: str
    rows: int
    users: int


@dataclass
class FilterLedger:
    """Stage-by-stage accounting of the cascade (rows and unique authors)."""

    stages: list[LedgerStage] = field(default_factory=list)
    sampling: dict = field(default_factory=dict)

    def record(self, stage: str, posts: Sequence[Post]) -> None:
        self.stages.append(
            LedgerStage(stage=stage, rows=len(posts), users=len({p.author for p in posts}))
        )

    def rows(self) -> list[int]:
        return [s.rows for s in self.stages]

    def to_dict(self) -> dict:
        return {
            "stages": [
                {"stage": s.stage, "rows": s.rows, "users": s.users} for s in self.stages
            ],
            "sampling": self.sampling,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


class CorpusFormatError(ValueError):
    pass


_REQUIRED_FIELDS = ("id", "author", "subreddit", "text")


def _parse_post(record: dict) -> Post:
    for key in _REQUIRED_FIELDS:
        if key not in record:
            raise CorpusFormatError(f"missing field {key!r}")
        if not isinstance(record[key], str):
            raise CorpusFormatError(f"field {key!r} must be a string")
    if not record["id"]:
        raise CorpusFormatError("field 'id' must be non-empty")
    created_at = None
    if record.get("created_at"):
        try:
            created_at = datetime.fromisoformat(record["created_at"])
        except ValueError as exc:
            raise CorpusFormatError(f"bad created_at: {exc}") from exc
    kind = record.get("kind", "post")
    if kind not in ("post", "comment"):
        raise CorpusFormatError(f"bad kind: {kind!r}")
    over_18 = record.get("over_18")
    if over_18 is not None and not isinstance(over_18, bool):
        raise CorpusFormatError("field 'over_18' must be a boolean")
    return Post(
        id=record["id"],
        author=record["author"],
        subreddit=record["subreddit"],
        text=record["text"],
        created_at=created_at,
        kind=kind,
        over_18=over_18,
    )


def load_posts(
    path: str | Path, strict: bool = True
) -> tuple[list[Post], list[tuple[int, str]]]:
    """Read posts from JSONL, one object per line.

    Returns (posts, skipped) where skipped lists (line_number, reason) for
    unparseable lines. In strict mode the first bad line raises instead,
    so skipped is always empty. Duplicate ids count as malformed.
    """
    posts: list[Post] = []
    skipped: list[tuple[int, str]] = []
    seen_ids: set[str] = set()

    def problem(line_no: int, reason: str) -> None:
        if strict:
            raise CorpusFormatError(f"line {line_no}: {reason}")
        skipped.append((line_no, reason))

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                problem(line_no, f"invalid JSON ({exc})")
                continue
            try:
                post = _parse_post(record)
            except CorpusFormatError as exc:
                problem(line_no, str(exc))
                continue
            if post.id in seen_ids:
                problem(line_no, f"duplicate id {post.id!r}")
                continue
            seen_ids.add(post.id)
            posts.append(post)
    return posts, skipped


def save_posts(posts: Iterable[Post], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(json.dumps(post.to_dict(), ensure_ascii=False) + "\n")


def filter_nsfw(posts: Sequence[Post], config: FilterConfig) -> list[Post]:
    """Drop posts whose subreddit is blocklisted (case-insensitive) or whose
    record carries over_18 = true."""
    return [
        p
        for p in posts
        if p.subreddit.lower() not in config.nsfw_subreddits and not p.over_18
    ]


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _word_tokens(text: str) -> set[str]:
    return set(_WORD_RE.findall(text.lower()))


def filter_first_person(posts: Sequence[Post], config: FilterConfig) -> list[Post]:
    """Keep posts containing at least one lexicon word as a whole token.

    Tokens are maximal alphanumeric runs, so "mine" inside "examined" or
    "determine" never counts.
    """
    lexicon = set(config.pronoun_lexicon)
    return [p for p in posts if _word_tokens(p.text) & lexicon]


def filter_min_length(posts: Sequence[Post], config: FilterConfig) -> list[Post]:
    """Keep posts with at least min_words whitespace-separated words
    (boundary inclusive)."""
    return [p for p in posts if len(p.text.split()) >= config.min_words]


def sample_fraction(posts: Sequence[Post], config: FilterConfig) -> list[Post]:
    """Uniform sample without replacement of round(fraction * n) posts.

    Deterministic for a fixed seed and order-preserving; fraction 1.0 is
    the identity.
    """
    n = len(posts)
    k = round(config.sample_fraction * n)
    if k >= n:
        return list(posts)
    rng = random.Random(config.sample_seed)
    keep = sorted(rng.sample(range(n), k))
    return [posts[i] for i in keep]


def augment_with_subreddit(post: Post) -> str:
    """Prefix the post text with a first line naming the source subreddit.

    Downstream prompt steps rely on the subreddit being identifiable on
    line one. Not idempotent: callers must not augment twice.
    """
    if not post.subreddit:
        raise ValueError(f"post {post.id!r} has an empty subreddit")
    return f"Subreddit: r/{post.subreddit}\n{post.text}"


def run_filter_pipeline(
    posts: Sequence[Post], config: FilterConfig
) -> tuple[list[Post], FilterLedger]:
    """Apply nsfw -> first_person -> min_length -> sample, recording row and
    unique-user counts after each stage."""
    ledger = FilterLedger()
    ledger.record("input", posts)
    current = filter_nsfw(posts, config)
    ledger.record("nsfw", current)
    current = filter_first_person(current, config)
    ledger.record("first_person", current)
    current = filter_min_length(current, config)
    ledger.record("min_length", current)
    current = sample_fraction(current, config)
    ledger.record("sample", current)
    ledger.sampling = {
        "algorithm": SAMPLER_ALGORITHM,
        "seed": config.sample_seed,
        "fraction": config.sample_fraction,
    }
    return current, ledger
