"""Semantic query embedding with batching, pooling masks, and a cached store.

Queries are embedded through a pluggable embedder contract: the built-in
deterministic embedder hashes whitespace tokens into seeded unit vectors and
pools them, and an external-service client can stand in for a heavyweight
model behind the same interface. Batches are processed in chunks; padded
positions are masked so a query's vector never depends on what else shared
its batch (the pad value is the most-negative finite float for max pooling,
zero for mean pooling with the sum divided by the real token count).

The embedding store caches vectors keyed by the hash of the exact raw SQL
text, which makes embedding idempotent: re-embedding a cached query returns
bitwise-identical rows and never re-invokes the embedder.
"""

from __future__ import annotations

import json
import struct
import threading
import urllib.request
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import EmptyQuery, StoreUnavailable
from .sql_template import fnv1a64

POOLING_MODES = ("max", "mean")

# Pad value for max pooling: most-negative finite single-precision value,
# so NaNs never propagate while no real coordinate can lose to a pad.
MAX_POOL_PAD = float(np.finfo(np.float32).min)


@dataclass(frozen=True)
class EmbeddingConfig:
    dimension: int = 64
    batch_size: int = 512
    pooling: str = "max"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")


def tokenize(sql_text: str) -> list[str]:
    """Split query text on whitespace, lowercased. Empty text gives []."""
    return sql_text.lower().split()


def token_vector(token: str, config: EmbeddingConfig) -> np.ndarray:
    """Deterministic unit-norm vector for one token (float64)."""
    rng = np.random.default_rng((fnv1a64(token.encode("utf-8")), config.seed & 0xFFFFFFFFFFFFFFFF))
    vec = rng.standard_normal(config.dimension)
    vec /= np.linalg.norm(vec)
    return vec


def embed_batch(queries: Sequence[str], config: EmbeddingConfig) -> np.ndarray:
    """Embed queries with the built-in embedder, chunked by batch size.

    Returns a float32 matrix of shape (len(queries), dimension). Raises
    EmptyQuery when any query has no tokens.
    """
    out = np.empty((len(queries), config.dimension), dtype=np.float32)
    for start in range(0, len(queries), config.batch_size):
        chunk = queries[start : start + config.batch_size]
        out[start : start + len(chunk)] = _embed_chunk(chunk, config)
    return out


def _embed_chunk(chunk: Sequence[str], config: EmbeddingConfig) -> np.ndarray:
    token_lists = []
    for query in chunk:
        tokens = tokenize(query)
        if not tokens:
            raise EmptyQuery(f"query has no tokens: {query!r}")
        token_lists.append(tokens)

    max_len = max(len(tokens) for tokens in token_lists)
    pad = MAX_POOL_PAD if config.pooling == "max" else 0.0
    stacked = np.full((len(chunk), max_len, config.dimension), pad, dtype=np.float64)
    valid_len = np.empty(len(chunk), dtype=np.float64)
    for i, tokens in enumerate(token_lists):
        valid_len[i] = len(tokens)
        for j, token in enumerate(tokens):
            stacked[i, j] = token_vector(token, config)

    if config.pooling == "max":
        pooled = stacked.max(axis=1)
    else:
        pooled = stacked.sum(axis=1) / valid_len[:, None]
    return pooled.astype(np.float32)


class Embedder(Protocol):
    """Anything that maps a list of texts to an (n, d) float matrix."""

    dimension: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashedTokenEmbedder:
    """Built-in deterministic embedder (seeded token hashing + pooling)."""

    def __init__(self, config: EmbeddingConfig):
        self.config = config
        self.dimension = config.dimension

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return embed_batch(texts, self.config)


class ExternalEmbedderClient:
    """Client for an external embedding service.

    Wire format: GET /info returns {"dimension": d}; POST /embed takes a JSON
    list of SQL texts and returns a positional JSON list of d-length vectors.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        with urllib.request.urlopen(f"{self.base_url}/info", timeout=timeout) as resp:
            info = json.loads(resp.read().decode("utf-8"))
        self.dimension = int(info["dimension"])

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        body = json.dumps(list(texts)).encode("utf-8")
        request = urllib.request.Request(
            f"{self.base_url}/embed",
            data=body,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as resp:
            vectors = json.loads(resp.read().decode("utf-8"))
        matrix = np.asarray(vectors, dtype=np.float32)
        if matrix.shape != (len(texts), self.dimension):
            raise StoreUnavailable(
                f"embedding service returned shape {matrix.shape}, "
                f"expected {(len(texts), self.dimension)}"
            )
        return matrix


def text_key(sql_text: str) -> int:
    """64-bit cache key for the exact raw SQL text."""
    return int.from_bytes(blake2b(sql_text.encode("utf-8"), digest_size=8).digest(), "little")


class EmbeddingStore:
    """Content-addressed vector cache persisted as one binary file.

    Layout: magic (8 bytes) + dimension (uint32 LE) + count (uint64 LE),
    then per entry key (uint64 LE) + dimension float32 LE values. Inserts are
    first-writer-wins under a lock; lookups are lock-free on the dict.
    """

    MAGIC = b"AWMVEC01"

    def __init__(self, path: str | Path, dimension: int):
        self.path = Path(path)
        self.dimension = dimension
        self._vectors: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path: str | Path, dimension: int | None = None) -> "EmbeddingStore":
        path = Path(path)
        if path.exists():
            return cls._load(path, dimension)
        if dimension is None:
            raise StoreUnavailable(f"embedding store missing and no dimension given: {path}")
        if not path.parent.is_dir():
            raise StoreUnavailable(f"embedding store directory missing: {path.parent}")
        return cls(path, dimension)

    @classmethod
    def _load(cls, path: Path, dimension: int | None) -> "EmbeddingStore":
        data = path.read_bytes()
        header = len(cls.MAGIC) + 4 + 8
        if len(data) < header or data[: len(cls.MAGIC)] != cls.MAGIC:
            raise StoreUnavailable(f"not an embedding store: {path}")
        stored_dim = struct.unpack_from("<I", data, len(cls.MAGIC))[0]
        count = struct.unpack_from("<Q", data, len(cls.MAGIC) + 4)[0]
        if dimension is not None and dimension != stored_dim:
            raise StoreUnavailable(
                f"embedding store at {path} has dimension {stored_dim}, expected {dimension}"
            )
        store = cls(path, stored_dim)
        entry = 8 + stored_dim * 4
        expected = header + count * entry
        if len(data) < expected:
            raise StoreUnavailable(f"embedding store truncated: {path}")
        offset = header
        for _ in range(count):
            key = struct.unpack_from("<Q", data, offset)[0]
            vec = np.frombuffer(data, dtype="<f4", count=stored_dim, offset=offset + 8).copy()
            store._vectors[key] = vec
            offset += entry
        return store

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, sql_text: str) -> bool:
        return text_key(sql_text) in self._vectors

    def get(self, sql_text: str) -> np.ndarray | None:
        return self._vectors.get(text_key(sql_text))

    def put(self, sql_text: str, vector: np.ndarray) -> np.ndarray:
        """Insert unless present; the first stored value wins."""
        key = text_key(sql_text)
        with self._lock:
            existing = self._vectors.get(key)
            if existing is not None:
                return existing
            value = np.asarray(vector, dtype=np.float32).copy()
            self._vectors[key] = value
            return value

    def save(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        with tmp.open("wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<I", self.dimension))
            fh.write(struct.pack("<Q", len(self._vectors)))
            for key in sorted(self._vectors):
                fh.write(struct.pack("<Q", key))
                fh.write(self._vectors[key].astype("<f4").tobytes())
        tmp.replace(self.path)


def embed_with_store(
    queries: Sequence[str],
    store: EmbeddingStore,
    config: EmbeddingConfig,
    embedder: Embedder | None = None,
) -> np.ndarray:
    """Embed queries through the cache; only misses reach the embedder.

    Output rows follow input order. A text occurring several times in one
    call is embedded at most once (idempotence holds within and across calls).
    """
    if embedder is None:
        embedder = HashedTokenEmbedder(config)
    if embedder.dimension != store.dimension:
        raise StoreUnavailable(
            f"embedder dimension {embedder.dimension} != store dimension {store.dimension}"
        )

    out = np.empty((len(queries), store.dimension), dtype=np.float32)
    miss_texts: list[str] = []
    seen: set[int] = set()
    for query in queries:
        key = text_key(query)
        if key not in store._vectors and key not in seen:
            seen.add(key)
            miss_texts.append(query)

    if miss_texts:
        fresh = embedder.embed(miss_texts)
        for text, row in zip(miss_texts, fresh):
            store.put(text, row)

    for i, query in enumerate(queries):
        out[i] = store.get(query)
    return out


__all__ = [
    "EmbeddingConfig",
    "EmbeddingStore",
    "Embedder",
    "HashedTokenEmbedder",
    "ExternalEmbedderClient",
    "tokenize",
    "token_vector",
    "embed_batch",
    "embed_with_store",
    "text_key",
    "MAX_POOL_PAD",
]
