"""Unit-norm verse embeddings keyed by (corpus id, verse address).

Vectors are normalized in 64-bit arithmetic at insertion and stored as
32-bit floats; similarities are accumulated in 64-bit. The on-disk ITXE
format is little-endian: magic ``ITXE``, u32 version (=1), u32 dim, u64
record count, then per record a u16 key length, the UTF-8 key
(``corpus_id|BOOK.ch.vs``), and dim f32 components. Records are sorted
ascending by key bytes, and a well-formed file round-trips bit-exactly.

The embedding model itself is deliberately outside this module: vectors
arrive either from an ITXE file or from an HTTP embedding service, and are
treated as input data. Absolute similarity values are therefore a property
of whichever model produced the store, not of this toolkit.

A store is single-writer while being built, then frozen (by convention)
and safe for unlimited concurrent reads.
"""

from __future__ import annotations

import os
import struct
import time
from pathlib import Path
from typing import IO, Sequence

import numpy as np
import requests

from .corpus import VerseRef
from .errors import (
    DuplicateKeyError,
    InvalidVectorError,
    MissingEmbeddingError,
    ProtocolError,
    RemoteError,
    StoreFormatError,
)

MAGIC = b"ITXE"
VERSION = 1
NORM_TOLERANCE = 1e-4

_HEADER = struct.Struct("<4sIIQ")
_KEYLEN = struct.Struct("<H")


def normalize(v) -> np.ndarray:
    """v / ||v||_2 in float64. Rejects empty, zero-norm, non-finite input."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidVectorError("vector must be 1-dimensional and non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidVectorError("vector has non-finite elements")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise InvalidVectorError("zero-norm vector cannot be normalized")
    return arr / norm


def cosine(u, v) -> float:
    """Dot product of two unit vectors, accumulated in float64, clamped to [-1, 1].

    Operands are put in a canonical order first so cosine(u, v) and
    cosine(v, u) are the same accumulation, hence bit-identical.
    """
    a = np.ascontiguousarray(u, dtype=np.float64)
    b = np.ascontiguousarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidVectorError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if b.tobytes() < a.tobytes():
        a, b = b, a
    return min(1.0, max(-1.0, float(np.dot(a, b))))


def store_key(corpus_id: str, ref: VerseRef) -> str:
    return f"{corpus_id}|{ref}"


def parse_store_key(key: str) -> tuple[str, VerseRef]:
    corpus_id, sep, token = key.partition("|")
    if not sep or not corpus_id:
        raise ValueError(f"store key {key!r} is not corpus_id|BOOK.ch.vs")
    return corpus_id, VerseRef.from_token(token)


class EmbeddingStore:
    """Fixed-dimension f32 vectors keyed by ``corpus_id|BOOK.ch.vs``."""

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidVectorError(f"dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self._vectors: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.dim == other.dim
            and self._vectors.keys() == other._vectors.keys()
            and all(
                self._vectors[k].tobytes() == other._vectors[k].tobytes()
                for k in self._vectors
            )
        )

    def keys(self) -> list[str]:
        return sorted(self._vectors)

    def insert(self, corpus_id: str, ref: VerseRef, vector, *, raw: bool = False) -> None:
        """Normalize (float64) and store as float32.

        With raw=True the vector is taken as already-normalized float32 data
        and only validated; this is how files are loaded, so that a load
        reproduces saved bytes exactly.
        """
        key = store_key(corpus_id, ref)
        if key in self._vectors:
            raise DuplicateKeyError(f"duplicate store key {key!r}")
        if raw:
            arr = np.asarray(vector, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise InvalidVectorError(
                    f"vector for {key!r} has shape {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise InvalidVectorError(f"vector for {key!r} has non-finite elements")
            norm = float(np.linalg.norm(arr.astype(np.float64)))
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise InvalidVectorError(
                    f"vector for {key!r} has norm {norm!r}, expected 1 +/- {NORM_TOLERANCE}"
                )
        else:
            unit = normalize(vector)
            if unit.shape != (self.dim,):
                raise InvalidVectorError(
                    f"vector for {key!r} has shape {unit.shape}, expected ({self.dim},)"
                )
            arr = unit.astype(np.float32)
        arr.setflags(write=False)
        self._vectors[key] = arr

    def get(self, corpus_id: str, ref: VerseRef) -> np.ndarray | None:
        return self._vectors.get(store_key(corpus_id, ref))

    def vector(self, corpus_id: str, ref: VerseRef) -> np.ndarray:
        vec = self.get(corpus_id, ref)
        if vec is None:
            raise MissingEmbeddingError(f"no embedding for ({corpus_id!r}, {ref})")
        return vec

    def similarity(self, corpus_id: str, a: VerseRef, b: VerseRef) -> float:
        return cosine(self.vector(corpus_id, a), self.vector(corpus_id, b))

    def refs_for(self, corpus_id: str) -> list[VerseRef]:
        prefix = corpus_id + "|"
        out = []
        for key in self._vectors:
            if key.startswith(prefix):
                out.append(VerseRef.from_token(key[len(prefix):]))
        out.sort()
        return out

    def merge(self, other: "EmbeddingStore") -> None:
        if other.dim != self.dim:
            raise InvalidVectorError(
                f"cannot merge stores of dimension {other.dim} into {self.dim}"
            )
        for key in other.keys():
            if key in self._vectors:
                raise DuplicateKeyError(f"duplicate store key {key!r} while merging")
            self._vectors[key] = other._vectors[key]


def save_store(store: EmbeddingStore, sink: IO[bytes]) -> None:
    """Write the ITXE format; records sorted by key bytes."""
    entries = sorted(
        ((key.encode("utf-8"), vec) for key, vec in store._vectors.items()),
        key=lambda kv: kv[0],
    )
    sink.write(_HEADER.pack(MAGIC, VERSION, store.dim, len(entries)))
    for key_bytes, vec in entries:
        if len(key_bytes) > 0xFFFF:
            raise StoreFormatError(f"key too long ({len(key_bytes)} bytes)")
        sink.write(_KEYLEN.pack(len(key_bytes)))
        sink.write(key_bytes)
        sink.write(vec.astype("<f4").tobytes())


def load_store(source: IO[bytes]) -> EmbeddingStore:
    """Read the ITXE format, validating structure, ordering, and norms."""
    data = source.read()
    if len(data) < _HEADER.size:
        raise StoreFormatError("file shorter than header", offset=len(data))
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise StoreFormatError(f"unsupported version {version}", offset=4)
    if dim < 1:
        raise StoreFormatError(f"invalid dimension {dim}", offset=8)
    store = EmbeddingStore(dim=dim)
    offset = _HEADER.size
    vec_bytes = 4 * dim
    prev_key: bytes | None = None
    for i in range(count):
        if offset + _KEYLEN.size > len(data):
            raise StoreFormatError(f"truncated at record {i}", offset=offset)
        (key_len,) = _KEYLEN.unpack_from(data, offset)
        offset += _KEYLEN.size
        if offset + key_len + vec_bytes > len(data):
            raise StoreFormatError(f"truncated at record {i}", offset=offset)
        key_bytes = data[offset : offset + key_len]
        offset += key_len
        if prev_key is not None and key_bytes <= prev_key:
            raise StoreFormatError(
                f"records not strictly sorted at record {i}", offset=offset - key_len
            )
        prev_key = key_bytes
        try:
            key = key_bytes.decode("utf-8")
            corpus_id, ref = parse_store_key(key)
        except (UnicodeDecodeError, ValueError) as exc:
            raise StoreFormatError(
                f"invalid key at record {i}: {exc}", offset=offset - key_len
            ) from None
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        try:
            store.insert(corpus_id, ref, vec, raw=True)
        except (InvalidVectorError, DuplicateKeyError) as exc:
            raise StoreFormatError(str(exc), offset=offset - vec_bytes) from None
    if offset != len(data):
        raise StoreFormatError(
            f"{len(data) - offset} trailing bytes after {count} records", offset=offset
        )
    return store


def save_store_file(store: EmbeddingStore, path: str | Path) -> None:
    with open(path, "wb") as fh:
        save_store(store, fh)


def load_store_file(path: str | Path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        return load_store(fh)


TOKEN_ENV = "INTERTEXT_EMBED_TOKEN"


def fetch_remote(
    texts: Sequence[str],
    endpoint: str,
    batch_size: int,
    *,
    timeout: float = 60.0,
    retries: int = 3,
    backoff: float = 0.5,
    session: requests.Session | None = None,
) -> list[np.ndarray]:
    """Fetch embeddings over HTTP in order-preserving batches.

    POSTs ``{"texts": [...]}`` and expects ``{"embeddings": [[...], ...]}``.
    Transport failures are retried per batch up to `retries` times; a
    malformed response (wrong count, inconsistent dimension) is a protocol
    error and is not retried. Returned vectors are normalized float64.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if any(not t for t in texts):
        raise ValueError("texts must be non-empty strings")
    sess = session or requests.Session()
    headers = {}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    out: list[np.ndarray] = []
    dim: int | None = None
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start : start + batch_size])
        payload = _post_batch(
            sess, endpoint, batch, headers, timeout=timeout, retries=retries, backoff=backoff
        )
        embeddings = payload.get("embeddings") if isinstance(payload, dict) else None
        if not isinstance(embeddings, list):
            raise ProtocolError(f"response from {endpoint} lacks an 'embeddings' list")
        if len(embeddings) != len(batch):
            raise ProtocolError(
                f"requested {len(batch)} embeddings, got {len(embeddings)}"
            )
        for row in embeddings:
            vec = normalize(row)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ProtocolError(
                    f"inconsistent embedding dimension: {vec.size} vs {dim}"
                )
            out.append(vec)
    return out


def _post_batch(sess, endpoint, batch, headers, *, timeout, retries, backoff):
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        if attempt and backoff:
            time.sleep(backoff * attempt)
        try:
            resp = sess.post(endpoint, json={"texts": batch}, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if resp.status_code >= 500:
            last_error = RemoteError(f"{endpoint} answered {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise RemoteError(f"{endpoint} answered {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"non-JSON response from {endpoint}: {exc}") from None
    raise RemoteError(
        f"embedding request to {endpoint} failed after {retries + 1} attempts: {last_error}"
    )
