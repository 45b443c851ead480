"""Text encoders behind one batch interface.

Model identifiers of the form ``hash:<dim>`` select the built-in character
n-gram hashing encoder: fully deterministic, dependency-free, and offline,
which makes it the right backend for tests and plumbing checks. Any other
identifier is loaded as a sentence-transformers model.
"""

from __future__ import annotations

import hashlib

import numpy as np


class HashNgramEncoder:
    """Feature-hashed character trigrams; deterministic across runs and platforms."""

    NGRAM = 3

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.name = f"hash:{dim}"
        self.revision = "builtin-1"

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            padded = f"\x02{text}\x03"
            for i in range(max(len(padded) - self.NGRAM + 1, 1)):
                gram = padded[i : i + self.NGRAM].encode("utf-8")
                digest = hashlib.blake2b(gram, digest_size=8).digest()
                value = int.from_bytes(digest, "little")
                bucket = value % self.dim
                sign = 1.0 if (value >> 63) & 1 else -1.0
                out[row, bucket] += sign
            if not out[row].any():
                out[row, 0] = 1.0
        return out


class SentenceTransformerEncoder:
    """Thin adapter over sentence-transformers; loaded lazily."""

    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self._model = SentenceTransformer(model_name)
        self.revision = getattr(self._model, "_model_card_vars", {}).get("revision", "unknown")
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        return np.asarray(
            self._model.encode(
                texts,
                batch_size=batch_size,
                convert_to_numpy=True,
                normalize_embeddings=False,
                show_progress_bar=False,
            ),
            dtype=np.float64,
        )


def resolve_encoder(model: str):
    if model.startswith("hash:"):
        return HashNgramEncoder(dim=int(model.split(":", 1)[1]))
    return SentenceTransformerEncoder(model)
