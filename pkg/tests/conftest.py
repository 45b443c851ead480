"""Shared fixtures: tiny corpora, testament specs, synthetic embedding stores."""

from __future__ import annotations

import numpy as np
import pytest

from intertext.corpus import Corpus, Provenance, TestamentSpec, VerseRef
from intertext.crossrefs import CrossRef, Scope
from intertext.store import EmbeddingStore

from exactcos import exact_unit_pair


def make_corpus(verses: dict[str, str], id="test", language="en", provenance="original") -> Corpus:
    return Corpus(
        id=id,
        language=language,
        provenance=Provenance.coerce(provenance),
        verses={VerseRef.from_token(tok): text for tok, text in verses.items()},
    )


@pytest.fixture
def testaments() -> TestamentSpec:
    return TestamentSpec(
        jewish_books=("GEN", "EXO", "ISA"),
        christian_books=("MAT", "REV", "HEB"),
    )


def ref(first: str, second: str, votes: int = 100, scope: Scope = Scope.ACROSS) -> CrossRef:
    return CrossRef(
        first=VerseRef.from_token(first),
        second=VerseRef.from_token(second),
        votes=votes,
        scope=scope,
    )


# Six reference pairs, two per scope. The first endpoint's chapter holds one
# spare verse (the only legal baseline replacement); the second endpoint is
# the sole verse of its chapter, forcing the swap onto the first side. Every
# reference cosine is exactly float64(0.9) and every baseline cosine exactly
# float64(0.45), so the pooled ratio is exactly 2.0.
RATIO_FIXTURE_PAIRS = (
    ("GEN.1.1", "EXO.1.1", "GEN.1.2", Scope.WITHIN_JEWISH),
    ("GEN.2.1", "EXO.2.1", "GEN.2.2", Scope.WITHIN_JEWISH),
    ("MAT.1.1", "REV.1.1", "MAT.1.2", Scope.WITHIN_CHRISTIAN),
    ("MAT.2.1", "REV.2.1", "MAT.2.2", Scope.WITHIN_CHRISTIAN),
    ("ISA.1.1", "HEB.1.1", "ISA.1.2", Scope.ACROSS),
    ("ISA.2.1", "HEB.2.1", "ISA.2.2", Scope.ACROSS),
)


def build_exact_ratio_fixture(corpus_id: str = "fix"):
    """(corpus, refs, store) with ratio exactly 2.0 in every scope."""
    verses: dict[str, str] = {}
    refs: list[CrossRef] = []
    store = EmbeddingStore(dim=4)
    for a_tok, b_tok, spare_tok, scope in RATIO_FIXTURE_PAIRS:
        verses[a_tok] = f"text {a_tok}"
        verses[b_tok] = f"text {b_tok}"
        verses[spare_tok] = f"text {spare_tok}"
        refs.append(ref(a_tok, b_tok, votes=100, scope=scope))
        b_vec, a_vec = exact_unit_pair(0.9)
        _, spare_vec = exact_unit_pair(0.45)
        store.insert(corpus_id, VerseRef.from_token(a_tok), a_vec, raw=True)
        store.insert(corpus_id, VerseRef.from_token(b_tok), b_vec, raw=True)
        store.insert(corpus_id, VerseRef.from_token(spare_tok), spare_vec, raw=True)
    corpus = make_corpus(verses, id=corpus_id)
    return corpus, refs, store


def random_unit_store(corpus: Corpus, corpus_id: str, dim: int, rng: np.random.Generator,
                      mean_shift: float = 8.0) -> EmbeddingStore:
    """Structureless anisotropic embeddings: i.i.d. noise around a common direction.

    The shift keeps pairwise cosines positive (as real sentence embeddings
    are), so the ratio statistic is well defined while carrying no
    intertextual signal.
    """
    store = EmbeddingStore(dim=dim)
    offset = np.zeros(dim)
    offset[0] = mean_shift
    for vref in corpus.refs():
        store.insert(corpus_id, vref, rng.standard_normal(dim) + offset)
    return store


def grid_corpus(books: dict[str, tuple[int, int]], id="grid") -> Corpus:
    """books maps book code -> (n_chapters, verses_per_chapter)."""
    verses = {}
    for book, (chapters, per) in books.items():
        for ch in range(1, chapters + 1):
            for vs in range(1, per + 1):
                verses[f"{book}.{ch}.{vs}"] = f"{book} {ch}:{vs}"
    return make_corpus(verses, id=id)
