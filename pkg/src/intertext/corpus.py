"""Verse-level corpora: parsing, versification, and lookups.

A corpus file is headerless UTF-8 TSV with LF line endings, one verse per
line: ``book<TAB>chapter<TAB>verse<TAB>text``. Book codes are uppercased at
parse time and must match ``[A-Z0-9]{2,5}``; chapter and verse are decimal
integers >= 1; text may not contain TAB, CR, or LF. Blank lines and lines
starting with ``#`` are skipped.

All verse addresses are canonicalized to one versification scheme before
analysis; the mapping is an explicit per-corpus sidecar TSV (identity by
default). Corpus values are immutable after construction and safe for
concurrent reads.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from .errors import CollisionError, ConfigError, DuplicateKeyError, ParseError

logger = logging.getLogger(__name__)

_BOOK_RE = re.compile(r"^[A-Z0-9]{2,5}$")
_INT_RE = re.compile(r"^[0-9]+$", re.ASCII)


@dataclass(frozen=True, order=True)
class VerseRef:
    """Canonical verse address. Orders by (book, chapter, verse)."""

    book: str
    chapter: int
    verse: int

    def __post_init__(self):
        if not _BOOK_RE.match(self.book):
            raise ValueError(f"invalid book code {self.book!r}")
        if self.chapter < 1 or self.verse < 1:
            raise ValueError(f"chapter and verse must be >= 1, got {self}")

    def __str__(self) -> str:
        return f"{self.book}.{self.chapter}.{self.verse}"

    @classmethod
    def from_token(cls, token: str) -> "VerseRef":
        """Parse ``BOOK.ch.vs``. Raises ValueError on bad shape."""
        pieces = token.split(".")
        if len(pieces) != 3:
            raise ValueError(f"expected BOOK.ch.vs, got {token!r}")
        book, chapter, verse = pieces
        if not _INT_RE.match(chapter) or not _INT_RE.match(verse):
            raise ValueError(f"non-integer chapter/verse in {token!r}")
        return cls(book.upper(), int(chapter), int(verse))


class Provenance(Enum):
    ORIGINAL = "original"
    HUMAN = "human"
    MACHINE = "machine"

    @classmethod
    def coerce(cls, value: "Provenance | str") -> "Provenance":
        if isinstance(value, Provenance):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(
                f"unknown provenance {value!r}; expected one of "
                f"{', '.join(p.value for p in cls)}"
            ) from None


@dataclass(frozen=True)
class Corpus:
    """One edition/translation: identity plus an immutable verse->text map."""

    id: str
    language: str
    provenance: Provenance
    verses: Mapping[VerseRef, str]
    _chapters: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not self.id or any(c in self.id for c in "|\t\r\n"):
            raise ConfigError(f"invalid corpus id {self.id!r}")
        object.__setattr__(self, "provenance", Provenance.coerce(self.provenance))
        chapters: dict[tuple[str, int], list[VerseRef]] = {}
        for ref, text in self.verses.items():
            if not isinstance(ref, VerseRef):
                raise TypeError(f"corpus key {ref!r} is not a VerseRef")
            if not text or not text.strip():
                raise ValueError(f"empty text for {ref} in corpus {self.id!r}")
            chapters.setdefault((ref.book, ref.chapter), []).append(ref)
        for refs in chapters.values():
            refs.sort()
        object.__setattr__(self, "_chapters", chapters)

    def __len__(self) -> int:
        return len(self.verses)

    def __contains__(self, ref: VerseRef) -> bool:
        return ref in self.verses

    def resolve(self, ref: VerseRef) -> str | None:
        """Verse text, or None if the address is absent. Never raises."""
        return self.verses.get(ref)

    def chapter_verses(self, book: str, chapter: int) -> list[VerseRef]:
        """All refs in (book, chapter), sorted by verse number."""
        return list(self._chapters.get((book, chapter), ()))

    def refs(self) -> list[VerseRef]:
        return sorted(self.verses)


def parse_corpus(
    stream: IO[bytes] | IO[str] | Iterable[str],
    id: str,
    language: str,
    provenance: Provenance | str,
) -> Corpus:
    """Parse the corpus TSV format. Line order does not affect the result."""
    verses: dict[VerseRef, str] = {}
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise ParseError(
                f"expected 4 tab-separated columns, got {len(cols)}", line=lineno
            )
        book, chapter, verse, text = cols
        if not _INT_RE.match(chapter) or not _INT_RE.match(verse):
            raise ParseError(
                f"chapter/verse must be decimal integers, got "
                f"{chapter!r}/{verse!r}", line=lineno,
            )
        try:
            ref = VerseRef(book.upper(), int(chapter), int(verse))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if "\r" in text:
            raise ParseError("carriage return inside verse text", line=lineno)
        if not text.strip():
            raise ParseError(f"empty verse text for {ref}", line=lineno)
        if ref in verses:
            raise DuplicateKeyError(f"duplicate verse key {ref}", line=lineno)
        verses[ref] = text
    return Corpus(id=id, language=language, provenance=Provenance.coerce(provenance), verses=verses)


def load_corpus(path: str | Path, id: str, language: str, provenance: Provenance | str) -> Corpus:
    with open(path, "rb") as fh:
        return parse_corpus(fh, id=id, language=language, provenance=provenance)


def write_corpus(corpus: Corpus, sink: IO[bytes]) -> None:
    """Serialize in canonical order (sorted by ref); inverse of parse_corpus."""
    for ref in sorted(corpus.verses):
        line = f"{ref.book}\t{ref.chapter}\t{ref.verse}\t{corpus.verses[ref]}\n"
        sink.write(line.encode("utf-8"))


def dump_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "wb") as fh:
        write_corpus(corpus, fh)


@dataclass(frozen=True)
class VersificationMap:
    """Injective re-keying table for one corpus (source -> canonical)."""

    corpus_id: str
    entries: tuple[tuple[VerseRef, VerseRef], ...]

    def __post_init__(self):
        sources: set[VerseRef] = set()
        targets: set[VerseRef] = set()
        for src, dst in self.entries:
            if src in sources:
                raise ConfigError(f"versification map repeats source {src}")
            if dst in targets:
                raise ConfigError(f"versification map repeats target {dst}")
            sources.add(src)
            targets.add(dst)

    def as_dict(self) -> dict[VerseRef, VerseRef]:
        return dict(self.entries)

    def inverse(self) -> "VersificationMap":
        return VersificationMap(
            corpus_id=self.corpus_id,
            entries=tuple((dst, src) for src, dst in self.entries),
        )


def parse_versification_map(stream: IO[bytes] | IO[str] | Iterable[str]) -> VersificationMap:
    """Parse the sidecar TSV: ``corpus_id<TAB>src.B.c.v<TAB>dst.B.c.v``."""
    corpus_id: str | None = None
    entries: list[tuple[VerseRef, VerseRef]] = []
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise ParseError(
                f"expected 3 tab-separated columns, got {len(cols)}", line=lineno
            )
        cid, src_tok, dst_tok = cols
        if corpus_id is None:
            corpus_id = cid
        elif cid != corpus_id:
            raise ParseError(
                f"mixed corpus ids in one map file ({corpus_id!r} vs {cid!r})",
                line=lineno,
            )
        try:
            entries.append((VerseRef.from_token(src_tok), VerseRef.from_token(dst_tok)))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if corpus_id is None:
        raise ParseError("versification map has no entries and no corpus id")
    return VersificationMap(corpus_id=corpus_id, entries=tuple(entries))


def load_versification_map(path: str | Path) -> VersificationMap:
    with open(path, "rb") as fh:
        return parse_versification_map(fh)


def apply_versification(corpus: Corpus, vmap: VersificationMap) -> Corpus:
    """Re-key mapped verses to their canonical addresses.

    Map sources absent from the corpus are logged as warnings and skipped.
    The rebuild is atomic, so swap cycles are legal; a mapped verse landing
    on a key still held by an unmapped verse is a fatal collision.
    """
    if vmap.corpus_id != corpus.id:
        raise ConfigError(
            f"versification map is for corpus {vmap.corpus_id!r}, "
            f"not {corpus.id!r}"
        )
    mapping = vmap.as_dict()
    for src in mapping:
        if src not in corpus.verses:
            logger.warning(
                "versification source %s not present in corpus %s", src, corpus.id
            )
    rekeyed: dict[VerseRef, str] = {}
    for ref in sorted(corpus.verses):
        target = mapping.get(ref, ref)
        if target in rekeyed:
            raise CollisionError(
                f"versification collision: two verses map to {target} "
                f"in corpus {corpus.id!r}"
            )
        rekeyed[target] = corpus.verses[ref]
    return Corpus(
        id=corpus.id,
        language=corpus.language,
        provenance=corpus.provenance,
        verses=rekeyed,
    )


@dataclass(frozen=True)
class TestamentSpec:
    """Ordered book lists for the two testaments; defines canonical book order."""

    jewish_books: tuple[str, ...]
    christian_books: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        overlap = set(self.jewish_books) & set(self.christian_books)
        if overlap:
            raise ConfigError(f"books in both testaments: {sorted(overlap)}")
        index = {}
        for i, book in enumerate(self.jewish_books + self.christian_books):
            if book in index:
                raise ConfigError(f"book {book!r} listed twice")
            index[book] = i
        object.__setattr__(self, "_index", index)

    def book_index(self, book: str) -> int:
        try:
            return self._index[book]
        except KeyError:
            raise ConfigError(f"book {book!r} is not in the testament spec") from None

    def testament(self, book: str) -> str:
        self.book_index(book)
        return "jewish" if book in set(self.jewish_books) else "christian"

    def sort_key(self, ref: VerseRef) -> tuple[int, int, int]:
        return (self.book_index(ref.book), ref.chapter, ref.verse)


def parse_testament_spec(text: str) -> TestamentSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"testament spec is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or set(data) != {"jewish", "christian"}:
        raise ParseError('testament spec must be {"jewish": [...], "christian": [...]}')
    for key in ("jewish", "christian"):
        if not isinstance(data[key], list) or not all(isinstance(b, str) for b in data[key]):
            raise ParseError(f"testament spec {key!r} must be a list of book codes")
    return TestamentSpec(
        jewish_books=tuple(data["jewish"]), christian_books=tuple(data["christian"])
    )


def load_testament_spec(path: str | Path) -> TestamentSpec:
    return parse_testament_spec(Path(path).read_text(encoding="utf-8"))


def _iter_lines(stream: IO[bytes] | IO[str] | Iterable[str]) -> Iterator[str]:
    """Yield decoded lines without trailing LF, preserving CR for validation."""
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw[:-1] if raw.endswith("\n") else raw
