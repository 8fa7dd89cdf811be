"""Chat-completion clients for the rewriting pipeline.

The orchestrator only needs the ChatClient protocol. HttpChatClient talks
to any OpenAI-compatible chat endpoint (locally hosted inference servers
included) with rate limiting and exponential backoff. MockChatClient is a
deterministic stand-in that rewrites by seeded word shuffling, so the whole
pipeline runs offline and reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, Sequence

import requests

if TYPE_CHECKING:
    from .generation import GenerationConfig


class ChatError(Exception):
    pass


class TransportError(ChatError):
    """The endpoint could not be reached or kept failing after retries."""


class ChatClient(Protocol):
    def complete(
        self, system: str, user_messages: Sequence[str], config: "GenerationConfig"
    ) -> str: ...


class HttpChatClient:
    """POSTs {model, messages, temperature, top_p, max_tokens} and returns
    the first choice's message content.

    Retries transport errors, 429 and 5xx with exponential backoff; other
    HTTP errors raise immediately. Safe for concurrent use; a shared
    rate limiter enforces the minimum request interval across threads.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 4,
        backoff_base: float = 0.5,
        min_interval: float = 0.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint or os.environ.get("DF_ENDPOINT")
        if not self.endpoint:
            raise ValueError("no chat endpoint configured (set DF_ENDPOINT)")
        self.api_key = api_key if api_key is not None else os.environ.get("DF_API_KEY")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._lock = threading.Lock()
        self._last_request = 0.0
        self.min_interval = min_interval
        self._session = session or requests.Session()

    def _throttle(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._last_request + self.min_interval - now
            if wait > 0:
                time.sleep(wait)
                now = time.monotonic()
            self._last_request = now

    def complete(self, system: str, user_messages: Sequence[str], config) -> str:
        messages = [{"role": "system", "content": system}] if system else []
        messages += [{"role": "user", "content": m} for m in user_messages]
        body = {
            "model": config.model_name,
            "messages": messages,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            self._throttle()
            try:
                resp = self._session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise TransportError(f"endpoint returned {resp.status_code}")
                resp.raise_for_status()
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (requests.RequestException, TransportError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff_base * 2**attempt)
            except (KeyError, IndexError, ValueError) as exc:
                raise ChatError(f"malformed completion response: {exc}") from exc
        raise TransportError(str(last_error))


def _stable_seed(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class MockChatClient:
    """Deterministic offline chat client.

    Rewrites by shuffling the words of the incoming text with a PRNG seeded
    from the text itself, so repeated runs are byte-identical. Refusal
    behavior is driven by substring triggers: any user message containing a
    trigger gets the refusal text instead of a rewrite. ``echo_marker``
    mode returns the text under the marker unchanged (useful for parser
    tests). A call log records (system, user_messages) tuples in order.
    """

    def __init__(
        self,
        marker: str = '"Changed Post":',
        refuse_if_contains: Sequence[str] = (),
        refusal_text: str = "I cannot create content of that kind.",
        mode: str = "shuffle",
    ):
        if mode not in ("shuffle", "echo_marker"):
            raise ValueError(f"unknown mock mode: {mode!r}")
        self.marker = marker
        self.refuse_if_contains = tuple(refuse_if_contains)
        self.refusal_text = refusal_text
        self.mode = mode
        self.calls: list[tuple[str, tuple[str, ...]]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_fixture(cls, path: str | Path) -> "MockChatClient":
        """Build from a JSON fixture: {"marker"?, "refuse_if_contains"?,
        "refusal_text"?, "mode"?}."""
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            marker=spec.get("marker", '"Changed Post":'),
            refuse_if_contains=spec.get("refuse_if_contains", ()),
            refusal_text=spec.get("refusal_text", "I cannot create content of that kind."),
            mode=spec.get("mode", "shuffle"),
        )

    def complete(self, system: str, user_messages: Sequence[str], config) -> str:
        with self._lock:
            self.calls.append((system, tuple(user_messages)))
        joined = "\n".join(user_messages)
        for trigger in self.refuse_if_contains:
            if trigger in joined:
                return self.refusal_text
        body = self._strip_instruction(user_messages[-1])
        if self.mode == "echo_marker":
            return f"{self.marker} {body}"
        words = body.split()
        rng = random.Random(_stable_seed(body) ^ _stable_seed(f"{config.temperature}"))
        rng.shuffle(words)
        # Inject a body-derived pseudoword so a mock rewrite can never be a
        # verbatim copy of any input, even across chained shuffles.
        tag = hashlib.blake2b(body.encode("utf-8"), digest_size=2).hexdigest()
        words.insert(rng.randrange(len(words) + 1), f"w{tag}")
        return f"{self.marker} {' '.join(words)}"

    def _strip_instruction(self, message: str) -> str:
        # The orchestrator sends "<step prompt>\n\n<text>"; rewrite the text
        # part. Chained steps carry the previous reply, so consume its
        # marker the way a real model reads the changed post.
        body = message.split("\n\n", 1)[1] if "\n\n" in message else message
        index = body.rfind(self.marker)
        if index >= 0:
            body = body[index + len(self.marker):].strip()
        return body
