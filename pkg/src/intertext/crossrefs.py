"""Crowd-voted cross-reference gold standard: parsing, folding, filtering.

Input rows are directed verse-to-verse links with signed vote counts.
Direction is discarded by summing votes over both orientations of a pair;
range references (``Gen.1.1-Gen.1.3``) are skipped, not expanded. A pair
is kept when its folded votes reach the threshold, its endpoints sit in
different books, and both endpoints resolve in every supplied corpus.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Mapping, Sequence

from .corpus import Corpus, TestamentSpec, VerseRef, _iter_lines
from .errors import ParseError

_HEADER_PREFIX = "From Verse"
_VOTES_RE = re.compile(r"^-?[0-9]+$", re.ASCII)


class Scope(Enum):
    WITHIN_JEWISH = "within_jewish"
    WITHIN_CHRISTIAN = "within_christian"
    ACROSS = "across"


@dataclass(frozen=True)
class RawReference:
    """One directed row from the dataset; votes may be negative."""

    from_ref: VerseRef
    to_ref: VerseRef
    votes: int

    def __post_init__(self):
        if self.from_ref == self.to_ref:
            raise ValueError(f"self-referential link {self.from_ref}")


@dataclass(frozen=True)
class CrossRef:
    """An unordered verse pair with folded votes and testament scope.

    Endpoints are oriented by canonical book order (first <= second), so a
    pair has exactly one representation.
    """

    first: VerseRef
    second: VerseRef
    votes: int
    scope: Scope

    @property
    def key(self) -> str:
        return f"{self.first}|{self.second}"


@dataclass
class ParsedCrossRefs:
    references: list[RawReference]
    skipped_ranges: int


@dataclass
class FoldedPairs:
    """Unordered-pair vote sums; pairs keyed as (low, high) by field order."""

    votes: dict[tuple[VerseRef, VerseRef], int]
    duplicate_rows: int

    def items(self):
        return self.votes.items()


@dataclass
class FilteredRefs:
    refs: list[CrossRef]
    below_threshold: int
    unresolvable: int
    same_book: int


def _parse_verse_token(token: str, aliases: Mapping[str, str] | None) -> tuple[VerseRef, bool]:
    """Parse ``Book.ch.vs`` with optional ``-Book.ch.vs`` range suffix.

    Returns (ref, is_range); for a range only the detection matters, the
    start ref is parsed to validate the grammar.
    """
    is_range = False
    if "-" in token:
        start, _, rest = token.partition("-")
        # A range suffix must itself be a verse token.
        if rest.count(".") != 2:
            raise ValueError(f"malformed range suffix in {token!r}")
        token = start
        is_range = True
    pieces = token.split(".")
    if len(pieces) != 3:
        raise ValueError(f"expected Book.ch.vs, got {token!r}")
    book_token, chapter, verse = pieces
    book = (aliases or {}).get(book_token, book_token.upper())
    ref = VerseRef.from_token(f"{book}.{chapter}.{verse}")
    return ref, is_range


def parse_crossrefs(
    stream: IO[bytes] | IO[str] | Iterable[str],
    aliases: Mapping[str, str] | None = None,
) -> ParsedCrossRefs:
    """Parse the ``From<TAB>To<TAB>Votes`` dataset.

    An optional header line beginning ``From Verse`` is skipped. Book tokens
    are mapped through `aliases` when given, else uppercased.
    """
    references: list[RawReference] = []
    skipped = 0
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith(_HEADER_PREFIX):
            continue
        cols = line.rstrip("\r").split("\t")
        if len(cols) != 3:
            raise ParseError(
                f"expected 3 tab-separated columns, got {len(cols)}", line=lineno
            )
        from_tok, to_tok, votes_tok = cols
        try:
            from_ref, from_range = _parse_verse_token(from_tok.strip(), aliases)
            to_ref, to_range = _parse_verse_token(to_tok.strip(), aliases)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        votes_tok = votes_tok.strip()
        if not _VOTES_RE.match(votes_tok):
            raise ParseError(f"votes must be an integer, got {votes_tok!r}", line=lineno)
        if from_range or to_range:
            skipped += 1
            continue
        try:
            references.append(RawReference(from_ref, to_ref, int(votes_tok)))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return ParsedCrossRefs(references=references, skipped_ranges=skipped)


def load_crossrefs(path, aliases: Mapping[str, str] | None = None) -> ParsedCrossRefs:
    with open(path, "rb") as fh:
        return parse_crossrefs(fh, aliases=aliases)


def parse_book_aliases(stream: IO[bytes] | IO[str] | Iterable[str]) -> dict[str, str]:
    """Parse a two-column TSV mapping dataset book tokens to corpus codes."""
    aliases: dict[str, str] = {}
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.rstrip("\r").split("\t")
        if len(cols) != 2:
            raise ParseError(
                f"expected 2 tab-separated columns, got {len(cols)}", line=lineno
            )
        token, code = cols[0].strip(), cols[1].strip()
        if token in aliases:
            raise ParseError(f"alias {token!r} repeated", line=lineno)
        aliases[token] = code
    return aliases


def load_book_aliases(path) -> dict[str, str]:
    with open(path, "rb") as fh:
        return parse_book_aliases(fh)


def fold_bidirectional(raw: Iterable[RawReference]) -> FoldedPairs:
    """Sum votes over both directions of each unordered pair.

    Duplicate same-direction rows are treated as additional votes and
    counted in `duplicate_rows`.
    """
    votes: dict[tuple[VerseRef, VerseRef], int] = {}
    seen_directed: set[tuple[VerseRef, VerseRef]] = set()
    duplicates = 0
    for ref in raw:
        directed = (ref.from_ref, ref.to_ref)
        if directed in seen_directed:
            duplicates += 1
        seen_directed.add(directed)
        pair = (min(ref.from_ref, ref.to_ref), max(ref.from_ref, ref.to_ref))
        votes[pair] = votes.get(pair, 0) + ref.votes
    return FoldedPairs(votes=votes, duplicate_rows=duplicates)


def filter_refs(
    pairs: FoldedPairs | Mapping[tuple[VerseRef, VerseRef], int],
    threshold: int,
    spec: TestamentSpec,
    corpora: Sequence[Corpus],
) -> FilteredRefs:
    """Apply the vote threshold, cross-book rule, and resolvability filter.

    Retained pairs are labeled with their testament scope and oriented by
    canonical book order. Requires at least one corpus; a retained pair's
    books must appear in the testament spec.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    if not corpora:
        raise ValueError("at least one corpus is required")
    if isinstance(pairs, FoldedPairs):
        pairs = pairs.votes
    refs: list[CrossRef] = []
    below = unresolvable = same_book = 0
    for (a, b), votes in sorted(pairs.items()):
        if a.book == b.book:
            same_book += 1
            continue
        if votes < threshold:
            below += 1
            continue
        if any(c.resolve(a) is None or c.resolve(b) is None for c in corpora):
            unresolvable += 1
            continue
        first, second = sorted((a, b), key=spec.sort_key)
        ta, tb = spec.testament(first.book), spec.testament(second.book)
        if ta != tb:
            scope = Scope.ACROSS
        elif ta == "jewish":
            scope = Scope.WITHIN_JEWISH
        else:
            scope = Scope.WITHIN_CHRISTIAN
        refs.append(CrossRef(first=first, second=second, votes=votes, scope=scope))
    return FilteredRefs(
        refs=refs, below_threshold=below, unresolvable=unresolvable, same_book=same_book
    )


def partition(refs: Iterable[CrossRef]) -> tuple[list[CrossRef], list[CrossRef], list[CrossRef]]:
    """Exact tripartition by scope: (within_jewish, within_christian, across)."""
    jewish: list[CrossRef] = []
    christian: list[CrossRef] = []
    across: list[CrossRef] = []
    buckets = {
        Scope.WITHIN_JEWISH: jewish,
        Scope.WITHIN_CHRISTIAN: christian,
        Scope.ACROSS: across,
    }
    for ref in refs:
        buckets[ref.scope].append(ref)
    return jewish, christian, across
