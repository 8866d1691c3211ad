"""Text embedding behind a pluggable interface, plus cosine-distance filtering.

Question/triple similarity is measured as cosine distance between feature
embeddings: ``distance = 1 - (u . v) / (|u| |v|)``, so 0 means identical
direction and 2 means opposite. A distance threshold (the "similarity gap")
keeps candidates close enough to the query.

Two embedders are provided: ``RemoteEmbedder`` talks to an HTTP embeddings
endpoint, ``HashEmbedder`` derives deterministic pseudo-random vectors from
token hashes and exists so that retrieval is fully reproducible in tests.
Embedders may be wrapped in a ``CachingEmbedder``; vectors are computed
lazily at retrieval time and never persisted, which keeps the stored graph
independent of any particular embedding model.
"""

from __future__ import annotations

import hashlib
import threading
import time
from typing import Protocol, Sequence

import httpx
import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyTextError,
    UpstreamServiceError,
    ZeroVectorError,
)
from .kg_store import Triple, normalize_text

DEFAULT_SIMILARITY_GAP = 0.55
HASH_EMBEDDER_DIM = 64


class EmbeddingVector:
    """Immutable fixed-length float vector.

    Entries must be finite and not all zero; a zero vector has no direction
    and would poison every distance computation downstream.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[float] | np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ZeroVectorError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ZeroVectorError("embedding contains non-finite entries")
        if not np.any(arr):
            raise ZeroVectorError("embedding is the zero vector")
        arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.size)

    def tolist(self) -> list[float]:
        return self._values.tolist()

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


def cosine_distance(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """1 minus the cosine similarity of ``u`` and ``v``, clamped to [0, 2].

    Symmetric, zero for identical directions, scale-invariant. The clamp
    only absorbs last-bit float noise around the ends of the range.
    """
    if u.dim != v.dim:
        raise DimensionMismatchError(f"dims differ: {u.dim} vs {v.dim}")
    a, b = u.values, v.values
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cannot compare a zero vector")
    distance = 1.0 - float(np.dot(a, b)) / (norm_a * norm_b)
    return min(max(distance, 0.0), 2.0)


def similarity_filter(
    query_vec: EmbeddingVector,
    candidates: Sequence[tuple[Triple, EmbeddingVector]],
    gap: float,
) -> list[Triple]:
    """Keep candidates whose distance to the query is at most ``gap``.

    Input order is preserved, and the threshold is inclusive: a candidate
    sitting exactly at the gap stays in.
    """
    if gap < 0:
        raise ValueError("similarity gap must be non-negative")
    return [t for t, vec in candidates if cosine_distance(query_vec, vec) <= gap]


def triple_text(triple: Triple) -> str:
    """Canonical single-line rendering of a triple for embedding."""
    return f"{triple.head} {triple.relation} {triple.tail}"


class Embedder(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...


class HashEmbedder:
    """Deterministic embedder: seeded token hashes drive pseudo-random vectors.

    Each whitespace token maps, via a keyed 64-bit hash, to a unit vector of
    dimension 64 drawn from a PCG64 stream seeded by that hash; the text
    embedding is the normalized mean of its token vectors. Identical texts
    share vectors within and across sessions, and texts sharing tokens land
    measurably closer than disjoint ones. Input is normalized first, so
    casing and extra whitespace do not change the result.

    Safe for concurrent use; the per-token memo is guarded by a lock.
    """

    def __init__(self, seed: int = 42, dim: int = HASH_EMBEDDER_DIM):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.seed = int(seed)
        self.dim = int(dim)
        self._seed_key = self.seed.to_bytes(8, "big", signed=True)
        self._token_vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            cached = self._token_vectors.get(token)
        if cached is not None:
            return cached
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._seed_key).digest()
        gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "big")))
        vec = gen.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        with self._lock:
            self._token_vectors[token] = vec
        return vec

    def embed(self, text: str) -> EmbeddingVector:
        normalized = normalize_text(text)
        if not normalized:
            raise EmptyTextError("cannot embed empty text")
        tokens = normalized.split()
        mean = np.mean([self._token_vector(tok) for tok in tokens], axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise ZeroVectorError(f"token vectors cancelled for text {normalized!r}")
        return EmbeddingVector(mean / norm)


class CachingEmbedder:
    """Memoizing wrapper around any embedder, keyed by normalized text.

    Tracks hit/miss counters. The wrapped embedder is always handed the
    normalized text, so cached and uncached results are bit-identical.
    """

    def __init__(self, inner: Embedder):
        self.inner = inner
        self.hits = 0
        self.misses = 0
        self._cache: dict[str, EmbeddingVector] = {}
        self._lock = threading.Lock()

    def embed(self, text: str) -> EmbeddingVector:
        key = normalize_text(text)
        if not key:
            raise EmptyTextError("cannot embed empty text")
        with self._lock:
            vec = self._cache.get(key)
            if vec is not None:
                self.hits += 1
                return vec
        vec = self.inner.embed(key)
        with self._lock:
            self._cache.setdefault(key, vec)
            self.misses += 1
        return vec


class RemoteEmbedder:
    """Client for an OpenAI-compatible ``/embeddings`` endpoint.

    Sends ``{"input": [texts], "model": name}`` and reads per-text float
    arrays back. Requests batch up to 64 texts; transient failures
    (network errors, 429, 5xx) are retried 3 times with exponential
    backoff before ``UpstreamServiceError`` is raised.
    """

    MAX_BATCH = 64
    TRANSIENT_STATUS = (429, 500, 502, 503, 504)

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.retries = retries
        self.backoff = backoff
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        vectors: list[EmbeddingVector] = []
        for start in range(0, len(texts), self.MAX_BATCH):
            vectors.extend(self._request(list(texts[start : start + self.MAX_BATCH])))
        return vectors

    def _request(self, batch: list[str]) -> list[EmbeddingVector]:
        payload = {"input": batch, "model": self.model}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self._client.post(f"{self.base_url}/embeddings", json=payload)
                if response.status_code in self.TRANSIENT_STATUS:
                    last_error = UpstreamServiceError(
                        f"embedding endpoint returned {response.status_code}"
                    )
                elif response.status_code != 200:
                    raise UpstreamServiceError(
                        f"embedding endpoint returned {response.status_code}: {response.text[:200]}"
                    )
                else:
                    return self._parse(response.json(), expected=len(batch))
            except httpx.TransportError as exc:
                last_error = exc
            if attempt < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise UpstreamServiceError(
            f"embedding request failed after {self.retries + 1} attempts: {last_error}"
        )

    @staticmethod
    def _parse(body, expected: int) -> list[EmbeddingVector]:
        try:
            rows = sorted(body["data"], key=lambda row: row.get("index", 0))
            vectors = [EmbeddingVector(row["embedding"]) for row in rows]
        except (KeyError, TypeError) as exc:
            raise UpstreamServiceError(f"unexpected embeddings payload: {exc}") from exc
        if len(vectors) != expected:
            raise UpstreamServiceError(
                f"embedding endpoint returned {len(vectors)} vectors for {expected} inputs"
            )
        return vectors
