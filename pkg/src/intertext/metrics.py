"""Intertextuality ratio, bootstrap confidence intervals, shift rankings.

The measure is the ratio of mean cosine similarity over known reference
pairs to mean similarity over chapter-constrained random baseline pairs
(one verse of the pair swapped for another verse of the same chapter).
Confidence intervals come from resampling the paired data with replacement
and taking percentile bounds over the recomputed ratios.

Randomness is fully derived: every reference and every bootstrap replicate
draws from its own stream keyed by (seed, purpose, identity), so results
are bit-identical for a given seed no matter how samples are ordered or
how many workers run the replicates.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Corpus, VerseRef
from .crossrefs import CrossRef, Scope, partition
from .errors import DegenerateBaselineError, DegenerateBootstrapError
from .rng import stream
from .store import EmbeddingStore, cosine

DEFAULT_BOOTSTRAP = 10_000
DEFAULT_BASELINE_K = 1
_MAX_REPLICATE_RETRIES = 8

# Percentile bounds as exact rationals (2.5% and 97.5%), applied nearest-rank.
_CI_LOW_NUM, _CI_LOW_DEN = 1, 40
_CI_HIGH_NUM, _CI_HIGH_DEN = 39, 40


class VerseUniverse(Protocol):
    """Anything that can enumerate a chapter's verses (Corpus, ChapterIndex)."""

    def chapter_verses(self, book: str, chapter: int) -> list[VerseRef]: ...


class ChapterIndex:
    """Chapter membership derived from a plain collection of verse refs."""

    def __init__(self, refs: Iterable[VerseRef]):
        self._chapters: dict[tuple[str, int], list[VerseRef]] = {}
        for ref in refs:
            self._chapters.setdefault((ref.book, ref.chapter), []).append(ref)
        for verses in self._chapters.values():
            verses.sort()

    @classmethod
    def from_store(cls, store: EmbeddingStore, corpus_id: str) -> "ChapterIndex":
        return cls(store.refs_for(corpus_id))

    def chapter_verses(self, book: str, chapter: int) -> list[VerseRef]:
        return list(self._chapters.get((book, chapter), ()))


@dataclass(frozen=True)
class PairedSample:
    """A reference similarity coupled with its chapter-swap baselines."""

    ref: CrossRef
    ref_sim: float
    baseline_sims: tuple[float, ...]
    baseline_refs: tuple[VerseRef, ...]
    swapped_sides: tuple[str, ...]


@dataclass(frozen=True)
class RatioResult:
    ratio: float
    ci_low: float
    ci_high: float
    n_refs: int
    baseline_k: int
    bootstrap_b: int
    seed: int
    dropped: int = 0


@dataclass(frozen=True)
class ShiftRecord:
    ref: CrossRef
    sim_source: float
    sim_target: float

    @property
    def delta(self) -> float:
        return self.sim_target - self.sim_source


def sample_baseline(
    ref: CrossRef,
    verses: VerseUniverse,
    rng: np.random.Generator,
    k: int,
) -> list[tuple[str, VerseRef]] | None:
    """Draw k chapter-constrained replacements for one reference pair.

    Per draw, a side of the pair is chosen uniformly and a replacement is
    drawn uniformly from the same book and chapter as the swapped verse,
    excluding both endpoints of the pair. A side without eligible
    replacements falls back to the other; if neither side has any, the
    reference cannot be baselined and None is returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    endpoints = {ref.first, ref.second}
    candidates = {
        "first": [
            v
            for v in verses.chapter_verses(ref.first.book, ref.first.chapter)
            if v not in endpoints
        ],
        "second": [
            v
            for v in verses.chapter_verses(ref.second.book, ref.second.chapter)
            if v not in endpoints
        ],
    }
    if not candidates["first"] and not candidates["second"]:
        return None
    draws: list[tuple[str, VerseRef]] = []
    for _ in range(k):
        side = "first" if int(rng.integers(2)) == 0 else "second"
        if not candidates[side]:
            side = "second" if side == "first" else "first"
        pool = candidates[side]
        draws.append((side, pool[int(rng.integers(len(pool)))]))
    return draws


def intertextuality_ratio(ref_sims: Sequence[float], baseline_sims: Sequence[float]) -> float:
    """mean(ref_sims) / mean(baseline_sims), both in float64."""
    if len(ref_sims) == 0 or len(baseline_sims) == 0:
        raise ValueError("similarity lists must be non-empty")
    num = float(np.mean(np.asarray(ref_sims, dtype=np.float64)))
    den = float(np.mean(np.asarray(baseline_sims, dtype=np.float64)))
    if den <= 0.0:
        raise DegenerateBaselineError(
            f"baseline similarity mean is {den!r}; topical verse pairs should "
            "have positive mean similarity"
        )
    return num / den


def nearest_rank_bounds(b: int) -> tuple[int, int]:
    """0-based indices of the 2.5th/97.5th percentiles, nearest-rank (ceil(q*b), 1-based)."""
    low = -(-b * _CI_LOW_NUM // _CI_LOW_DEN)
    high = -(-b * _CI_HIGH_NUM // _CI_HIGH_DEN)
    return max(low, 1) - 1, max(high, 1) - 1


def bootstrap_replicates(
    samples: Sequence[PairedSample],
    b: int,
    seed: int,
    *,
    workers: int = 1,
) -> np.ndarray:
    """Ratio recomputed on b with-replacement resamples of the paired data.

    Replicate r draws only from stream (seed, "bootstrap", r), so the result
    is independent of execution order and worker count. A replicate whose
    resampled baseline mean is not positive is redrawn from a derived
    substream a bounded number of times.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    if b < 1:
        raise ValueError("b must be >= 1")
    n = len(samples)
    ref_arr = np.asarray([s.ref_sim for s in samples], dtype=np.float64)
    base_sum = np.asarray([sum(s.baseline_sims) for s in samples], dtype=np.float64)
    base_cnt = np.asarray([len(s.baseline_sims) for s in samples], dtype=np.float64)

    def one(r: int) -> float:
        for attempt in range(_MAX_REPLICATE_RETRIES + 1):
            if attempt == 0:
                g = stream(seed, "bootstrap", r)
            else:
                g = stream(seed, "bootstrap", r, attempt)
            idx = g.integers(0, n, size=n)
            den = float(base_sum[idx].sum()) / float(base_cnt[idx].sum())
            if den > 0.0:
                return float(ref_arr[idx].mean()) / den
        raise DegenerateBootstrapError(
            f"replicate {r} kept a non-positive baseline mean after "
            f"{_MAX_REPLICATE_RETRIES} redraws"
        )

    out = np.empty(b, dtype=np.float64)
    if workers <= 1:
        for r in range(b):
            out[r] = one(r)
    else:
        chunk = -(-b // workers)
        ranges = [(w * chunk, min((w + 1) * chunk, b)) for w in range(workers)]

        def run(lo_hi):
            lo, hi = lo_hi
            for r in range(lo, hi):
                out[r] = one(r)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, [r for r in ranges if r[0] < r[1]]))
    return out


def bootstrap_ci(
    samples: Sequence[PairedSample],
    b: int,
    seed: int,
    *,
    workers: int = 1,
) -> tuple[float, float]:
    """2.5th and 97.5th nearest-rank percentiles of the replicate ratios."""
    ratios = np.sort(bootstrap_replicates(samples, b, seed, workers=workers))
    lo, hi = nearest_rank_bounds(b)
    return float(ratios[lo]), float(ratios[hi])


def build_paired_samples(
    refs: Sequence[CrossRef],
    store: EmbeddingStore,
    corpus_id: str,
    verses: VerseUniverse,
    k: int,
    seed: int,
) -> tuple[list[PairedSample], int]:
    """Reference and baseline similarities for each ref; returns (samples, dropped).

    References are processed in canonical pair order and each gets its own
    stream keyed by the pair identity, so the output is a pure function of
    (refs-as-set, store, k, seed). A reference whose endpoints both live in
    single-verse chapters has no legal baseline and is dropped from both
    the numerator and the denominator.
    """
    samples: list[PairedSample] = []
    dropped = 0
    for ref in sorted(refs, key=lambda r: (r.first, r.second)):
        vec_first = store.vector(corpus_id, ref.first)
        vec_second = store.vector(corpus_id, ref.second)
        ref_sim = cosine(vec_first, vec_second)
        rng = stream(seed, "baseline", ref.key)
        draws = sample_baseline(ref, verses, rng, k)
        if draws is None:
            dropped += 1
            continue
        sims = []
        for side, replacement in draws:
            kept = ref.second if side == "first" else ref.first
            sims.append(cosine(store.vector(corpus_id, kept), store.vector(corpus_id, replacement)))
        samples.append(
            PairedSample(
                ref=ref,
                ref_sim=ref_sim,
                baseline_sims=tuple(sims),
                baseline_refs=tuple(r for _, r in draws),
                swapped_sides=tuple(s for s, _ in draws),
            )
        )
    return samples, dropped


def compute_ratio_set(
    refs: Sequence[CrossRef],
    store: EmbeddingStore,
    corpus_id: str,
    k: int = DEFAULT_BASELINE_K,
    b: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    *,
    corpus: Corpus | None = None,
    workers: int = 1,
) -> dict[Scope, RatioResult]:
    """Ratio with bootstrap CI per testament scope, for one corpus.

    Replacement verses come from the corpus under analysis when given,
    otherwise from the store's own key set for `corpus_id` (equivalent when
    the store was built over the full corpus).
    """
    universe: VerseUniverse = corpus if corpus is not None else ChapterIndex.from_store(
        store, corpus_id
    )
    results: dict[Scope, RatioResult] = {}
    jewish, christian, across = partition(refs)
    for scope, scoped in (
        (Scope.WITHIN_JEWISH, jewish),
        (Scope.WITHIN_CHRISTIAN, christian),
        (Scope.ACROSS, across),
    ):
        if not scoped:
            continue
        samples, dropped = build_paired_samples(scoped, store, corpus_id, universe, k, seed)
        if not samples:
            raise DegenerateBaselineError(
                f"scope {scope.value}: every reference was dropped for lack of "
                "eligible baseline replacements"
            )
        pooled = [s for sample in samples for s in sample.baseline_sims]
        ratio = intertextuality_ratio([s.ref_sim for s in samples], pooled)
        ci_low, ci_high = bootstrap_ci(samples, b, seed, workers=workers)
        results[scope] = RatioResult(
            ratio=ratio,
            ci_low=ci_low,
            ci_high=ci_high,
            n_refs=len(samples),
            baseline_k=k,
            bootstrap_b=b,
            seed=seed,
            dropped=dropped,
        )
    return results


def shift_table(
    refs: Sequence[CrossRef],
    store: EmbeddingStore,
    source_corpus: str,
    target_corpus: str,
) -> list[ShiftRecord]:
    """Per-reference similarity shift between two corpora, largest |delta| first.

    Ties in |delta| are broken by the verse order of the pair endpoints.
    """
    records = [
        ShiftRecord(
            ref=ref,
            sim_source=store.similarity(source_corpus, ref.first, ref.second),
            sim_target=store.similarity(target_corpus, ref.first, ref.second),
        )
        for ref in refs
    ]
    records.sort(key=lambda r: (-abs(r.delta), r.ref.first, r.ref.second))
    return records
