"""Search and page-fetch clients used by the unlinkability scan.

The scan depends only on the small SearchClient/PageFetcher protocols.
HTTP implementations talk to a provider-agnostic JSON endpoint with
rate limiting and exponential backoff; file-backed fixtures make the
whole pipeline runnable offline and are what every test uses.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from typing import Protocol, Sequence

import requests


@dataclass(frozen=True)
class SearchResult:
    rank: int
    url: str
    snippet: str = ""

    def __post_init__(self):
        if not self.url:
            raise ValueError("search result url must be non-empty")


class SearchTransportError(Exception):
    """Search request could not be completed; the scan may retry later."""


class FetchError(Exception):
    """A single page could not be retrieved or reduced to text."""


class SearchClient(Protocol):
    def search(self, query: str, k: int) -> list[SearchResult]: ...


class PageFetcher(Protocol):
    def fetch(self, url: str) -> str: ...


class _RateLimiter:
    """Minimum-interval gate, safe across threads."""

    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._last + self.min_interval - now
            if delay > 0:
                time.sleep(delay)
                now = time.monotonic()
            self._last = now


class HttpSearchClient:
    """GET-based JSON search endpoint: ?q=<query>&k=<k> returning
    [{"rank", "url", "snippet"}, ...]."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        min_interval: float = 0.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get("DF_SEARCH_KEY")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._limiter = _RateLimiter(min_interval)
        self._session = session or requests.Session()

    def search(self, query: str, k: int) -> list[SearchResult]:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            self._limiter.wait()
            try:
                resp = self._session.get(
                    self.endpoint,
                    params={"q": query, "k": k},
                    headers=headers,
                    timeout=self.timeout,
                )
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise SearchTransportError(f"server returned {resp.status_code}")
                resp.raise_for_status()
                payload = resp.json()
                return self._parse(payload, k)
            except (requests.RequestException, SearchTransportError, ValueError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff_base * 2**attempt)
        raise SearchTransportError(str(last_error))

    @staticmethod
    def _parse(payload, k: int) -> list[SearchResult]:
        results = []
        for item in payload[:k]:
            results.append(
                SearchResult(
                    rank=int(item["rank"]),
                    url=item["url"],
                    snippet=item.get("snippet", ""),
                )
            )
        return results


class FixtureSearchClient:
    """File-backed search mock: a JSON object mapping query strings to
    result lists, with an optional "__default__" entry."""

    def __init__(self, path: str | Path):
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        self._by_query = raw
        self.queries: list[str] = []

    def search(self, query: str, k: int) -> list[SearchResult]:
        self.queries.append(query)
        rows = self._by_query.get(query, self._by_query.get("__default__", []))
        return [
            SearchResult(rank=int(r["rank"]), url=r["url"], snippet=r.get("snippet", ""))
            for r in rows[:k]
        ]


class _VisibleTextParser(HTMLParser):
    _SKIP = {"script", "style", "noscript", "template"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth and data.strip():
            self.chunks.append(data.strip())


def html_to_text(html: str) -> str:
    """Reduce an HTML document to its visible text by tag stripping."""
    parser = _VisibleTextParser()
    parser.feed(html)
    return " ".join(parser.chunks)


class HttpPageFetcher:
    """Fetch a URL and reduce it to visible text, capped at max_chars."""

    def __init__(
        self,
        timeout: float = 30.0,
        max_chars: int = 20000,
        min_interval: float = 0.0,
        user_agent: str = "dforge-unlink-scan/0.1",
        session: requests.Session | None = None,
    ):
        self.timeout = timeout
        self.max_chars = max_chars
        self.user_agent = user_agent
        self._session = session or requests.Session()
        self._limiters: dict[str, _RateLimiter] = {}
        self._limiter_lock = threading.Lock()
        self._min_interval = min_interval

    def _limiter_for(self, url: str) -> _RateLimiter:
        host = requests.utils.urlparse(url).hostname or ""
        with self._limiter_lock:
            if host not in self._limiters:
                self._limiters[host] = _RateLimiter(self._min_interval)
            return self._limiters[host]

    def fetch(self, url: str) -> str:
        self._limiter_for(url).wait()
        try:
            resp = self._session.get(
                url, timeout=self.timeout, headers={"User-Agent": self.user_agent}
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise FetchError(f"{url}: {exc}") from exc
        text = html_to_text(resp.text)
        return text[: self.max_chars]


class FixturePageFetcher:
    """File-backed fetcher mock: a JSON object mapping url -> page text.
    Unknown URLs raise FetchError, mirroring a dead link."""

    def __init__(self, path: str | Path):
        self._pages = json.loads(Path(path).read_text(encoding="utf-8"))
        self.fetched: list[str] = []

    def fetch(self, url: str) -> str:
        self.fetched.append(url)
        if url not in self._pages:
            raise FetchError(f"no fixture page for {url}")
        return self._pages[url]
