"""Embedding providers for the vector-based metrics.

bert_score and style_similarity consume vectors, never compute them: an
HTTP provider delegates to an external encoder service, and a hash-based
provider gives deterministic vectors for offline runs and tests.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np
import requests

from .textmetrics import tokenize


class EmbeddingProvider(Protocol):
    def token_vectors(self, text: str) -> np.ndarray: ...  # (n_tokens, dim)

    def pooled_vector(self, text: str) -> np.ndarray: ...  # (dim,)


class HashEmbeddingProvider:
    """Deterministic pseudo-embeddings: each token maps to a fixed vector
    derived from its hash; pooling is the token-vector mean. No semantics,
    stable across processes, which is exactly what offline runs need."""

    def __init__(self, dim: int = 16):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.uniform(-1.0, 1.0, self.dim)
            self._cache[token] = vec
        return vec

    def token_vectors(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(tok) for tok in tokens])

    def pooled_vector(self, text: str) -> np.ndarray:
        vectors = self.token_vectors(text)
        if vectors.shape[0] == 0:
            return np.zeros(self.dim)
        return vectors.mean(axis=0)


class HttpEmbeddingProvider:
    """POST {"texts": [...]} for per-token vectors, {"texts": [...],
    "pooled": true} for one vector per text; responses carry "vectors"."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self._session = session or requests.Session()

    def _post(self, payload: dict) -> list:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = self._session.post(
            self.endpoint, json=payload, headers=headers, timeout=self.timeout
        )
        resp.raise_for_status()
        return resp.json()["vectors"]

    def token_vectors(self, text: str) -> np.ndarray:
        vectors = self._post({"texts": [text]})[0]
        return np.asarray(vectors, dtype=float)

    def pooled_vector(self, text: str) -> np.ndarray:
        vectors = self._post({"texts": [text], "pooled": True})[0]
        return np.asarray(vectors, dtype=float)
