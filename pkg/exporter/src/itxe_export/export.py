"""Run an encoder over a corpus file and write the ITXE store.

ITXE layout (little-endian): magic ``ITXE`` | u32 version=1 | u32 dim |
u64 count | records of u16 key length, UTF-8 key ``corpus_id|BOOK.ch.vs``,
dim f32 components. Records sorted ascending by key bytes; every vector is
L2-normalized in float64 before the float32 rounding. A ``*.meta.json``
sidecar records the model identity, since the format itself is
model-agnostic.
"""

from __future__ import annotations

import datetime
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import read_corpus_tsv
from .encoders import resolve_encoder

_HEADER = struct.Struct("<4sIIQ")
_KEYLEN = struct.Struct("<H")


@dataclass(frozen=True)
class ExportJob:
    corpus_path: str
    corpus_id: str
    model: str
    out_path: str
    batch_size: int = 32

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.corpus_id or "|" in self.corpus_id:
            raise ValueError(f"invalid corpus id {self.corpus_id!r}")


def export(job: ExportJob, encoder=None) -> Path:
    """Embed every verse and write the store; returns the output path."""
    verses = read_corpus_tsv(job.corpus_path)
    if encoder is None:
        encoder = resolve_encoder(job.model)
    keys = sorted(
        f"{job.corpus_id}|{book}.{chapter}.{verse}".encode("utf-8")
        for (book, chapter, verse) in verses
    )
    by_key = {
        f"{job.corpus_id}|{book}.{chapter}.{verse}".encode("utf-8"): text
        for (book, chapter, verse), text in verses.items()
    }
    texts = [by_key[k] for k in keys]

    vectors = np.empty((len(texts), encoder.dim), dtype=np.float64)
    for start in range(0, len(texts), job.batch_size):
        batch = texts[start : start + job.batch_size]
        encoded = np.asarray(encoder.encode(batch, batch_size=job.batch_size), dtype=np.float64)
        if encoded.shape != (len(batch), encoder.dim):
            raise ValueError(
                f"encoder returned shape {encoded.shape}, "
                f"expected {(len(batch), encoder.dim)}"
            )
        vectors[start : start + len(batch)] = encoded
    if encoder.dim < 1:
        raise ValueError("encoder produced zero-dimensional output")
    norms = np.linalg.norm(vectors, axis=1)
    if not np.all(np.isfinite(vectors)) or np.any(norms == 0.0):
        raise ValueError("encoder produced non-finite or zero-norm vectors")
    unit = (vectors / norms[:, None]).astype("<f4")

    out_path = Path(job.out_path)
    with open(out_path, "wb") as fh:
        fh.write(_HEADER.pack(b"ITXE", 1, encoder.dim, len(keys)))
        for row, key in enumerate(keys):
            fh.write(_KEYLEN.pack(len(key)))
            fh.write(key)
            fh.write(unit[row].tobytes())

    meta = {
        "model": encoder.name,
        "revision": getattr(encoder, "revision", "unknown"),
        "dim": encoder.dim,
        "count": len(keys),
        "corpus_id": job.corpus_id,
        "normalized": True,
        "date": datetime.date.today().isoformat(),
    }
    meta_path = Path(str(out_path) + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", "utf-8")
    return out_path
