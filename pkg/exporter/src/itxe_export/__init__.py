"""Offline tool that embeds a verse corpus and writes an ITXE vector store.

The analysis toolkit treats embedding vectors as input data behind a file
interface; this package is the producer side of that boundary. It reads the
corpus TSV grammar, runs a sentence-embedding model (or the built-in
deterministic hashing encoder for offline/testing use), and writes the
binary ITXE format plus a JSON sidecar recording the model identity.
"""

__version__ = "0.1.0"

from .corpus import read_corpus_tsv  # noqa: F401
from .encoders import resolve_encoder  # noqa: F401
from .export import ExportJob, export  # noqa: F401
