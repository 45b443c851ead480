"""Minimal reader for the corpus TSV grammar.

Headerless UTF-8 TSV, LF endings: ``book<TAB>chapter<TAB>verse<TAB>text``;
blank lines and ``#`` comments skipped. Book codes are uppercased and must
match ``[A-Z0-9]{2,5}``; the text is embedded exactly as stored (no case
folding, no accent or diacritic stripping).
"""

from __future__ import annotations

import re
from pathlib import Path

_BOOK_RE = re.compile(r"^[A-Z0-9]{2,5}$")
_INT_RE = re.compile(r"^[0-9]+$", re.ASCII)


class CorpusFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def read_corpus_tsv(path: str | Path) -> dict[tuple[str, int, int], str]:
    """Parse into {(book, chapter, verse): text}, validating the grammar."""
    verses: dict[tuple[str, int, int], str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw[:-1] if raw.endswith("\n") else raw
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise CorpusFormatError(f"expected 4 columns, got {len(cols)}", lineno)
            book, chapter, verse, text = cols
            book = book.upper()
            if not _BOOK_RE.match(book):
                raise CorpusFormatError(f"invalid book code {book!r}", lineno)
            if not _INT_RE.match(chapter) or not _INT_RE.match(verse):
                raise CorpusFormatError("chapter/verse must be decimal integers", lineno)
            if "\r" in text:
                raise CorpusFormatError("carriage return inside verse text", lineno)
            if not text.strip():
                raise CorpusFormatError("empty verse text", lineno)
            key = (book, int(chapter), int(verse))
            if key[1] < 1 or key[2] < 1:
                raise CorpusFormatError("chapter and verse must be >= 1", lineno)
            if key in verses:
                raise CorpusFormatError(
                    f"duplicate verse {book}.{chapter}.{verse}", lineno
                )
            verses[key] = text
    return verses
