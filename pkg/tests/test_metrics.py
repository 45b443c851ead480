"""Metric engine: ratio, baseline sampling, bootstrap, shift ranking."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intertext.corpus import VerseRef
from intertext.crossrefs import Scope
from intertext.errors import (
    DegenerateBaselineError,
    DegenerateBootstrapError,
    MissingEmbeddingError,
)
from intertext.metrics import (
    ChapterIndex,
    PairedSample,
    bootstrap_ci,
    bootstrap_replicates,
    build_paired_samples,
    compute_ratio_set,
    intertextuality_ratio,
    nearest_rank_bounds,
    sample_baseline,
    shift_table,
)
from intertext.rng import stream
from intertext.store import EmbeddingStore

from conftest import build_exact_ratio_fixture, grid_corpus, make_corpus, ref
from exactcos import exact_unit_pair


def vr(token: str) -> VerseRef:
    return VerseRef.from_token(token)


def paired(values: list[tuple[float, tuple[float, ...]]]) -> list[PairedSample]:
    out = []
    for i, (ref_sim, baselines) in enumerate(values):
        out.append(
            PairedSample(
                ref=ref("GEN.1.1", f"MAT.1.{i + 1}"),
                ref_sim=ref_sim,
                baseline_sims=baselines,
                baseline_refs=tuple(vr(f"GEN.1.{j + 2}") for j in range(len(baselines))),
                swapped_sides=("first",) * len(baselines),
            )
        )
    return out


class TestRatio:
    def test_identical_means(self):
        assert intertextuality_ratio([0.7, 0.7], [0.7, 0.7]) == 1.0

    def test_hand_oracle(self):
        assert abs(intertextuality_ratio([0.9, 0.9], [0.45, 0.45]) - 2.0) < 1e-12

    def test_degenerate_baseline(self):
        with pytest.raises(DegenerateBaselineError):
            intertextuality_ratio([0.5], [-0.2])
        with pytest.raises(DegenerateBaselineError):
            intertextuality_ratio([0.5], [0.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            intertextuality_ratio([], [0.5])

    @given(
        st.lists(st.floats(-1, 1), min_size=1, max_size=20),
        st.lists(st.floats(0.05, 1), min_size=1, max_size=20),
        st.floats(1e-3, 1e3),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance(self, refs, bases, c):
        full = intertextuality_ratio(refs, bases)
        scaled = intertextuality_ratio([c * r for r in refs], [c * b for b in bases])
        assert scaled == pytest.approx(full, abs=1e-12, rel=1e-12)


class TestNearestRank:
    @pytest.mark.parametrize(
        "b,expected",
        [(10_000, (249, 9_749)), (1, (0, 0)), (40, (0, 38)), (41, (1, 39)), (39, (0, 38))],
    )
    def test_bounds(self, b, expected):
        assert nearest_rank_bounds(b) == expected

    def test_rank_39_of_40(self):
        # ceil(0.975 * 39) = 39 would be the naive float answer; exact
        # rational arithmetic gives ceil(1521/40) = 39 -> index 38.
        assert nearest_rank_bounds(39)[1] == 37 + 1


class TestSampleBaseline:
    def test_forced_choice_two_verse_chapter(self):
        corpus = grid_corpus({"GEN": (1, 2), "MAT": (1, 2)})
        r = ref("GEN.1.1", "MAT.1.1")
        for seed in range(20):
            draws = sample_baseline(r, corpus, stream(seed, "baseline", r.key), 3)
            for side, repl in draws:
                assert repl == (vr("GEN.1.2") if side == "first" else vr("MAT.1.2"))

    def test_single_verse_chapters_excluded(self):
        corpus = grid_corpus({"GEN": (1, 1), "MAT": (1, 1)})
        r = ref("GEN.1.1", "MAT.1.1")
        assert sample_baseline(r, corpus, stream(0, "baseline", r.key), 1) is None

    def test_fallback_to_other_side(self):
        corpus = grid_corpus({"GEN": (1, 1), "MAT": (1, 5)})
        r = ref("GEN.1.1", "MAT.1.1")
        draws = sample_baseline(r, corpus, stream(7, "baseline", r.key), 10)
        assert all(side == "second" and repl.book == "MAT" for side, repl in draws)

    def test_deterministic_given_seed(self):
        corpus = grid_corpus({"GEN": (2, 9), "MAT": (2, 9)})
        r = ref("GEN.1.3", "MAT.2.4")
        a = sample_baseline(r, corpus, stream(42, "baseline", r.key), 3)
        b = sample_baseline(r, corpus, stream(42, "baseline", r.key), 3)
        assert a == b

    def test_legality_small_sweep(self):
        corpus = grid_corpus({"GEN": (3, 7), "MAT": (3, 7)})
        refs = [ref(f"GEN.{c}.{v}", f"MAT.{c}.{v}") for c in (1, 2, 3) for v in (1, 4, 7)]
        for seed in range(40):
            for r in refs:
                for side, repl in sample_baseline(r, corpus, stream(seed, "baseline", r.key), 2):
                    swapped = r.first if side == "first" else r.second
                    assert repl not in (r.first, r.second)
                    assert (repl.book, repl.chapter) == (swapped.book, swapped.chapter)


def enumeration_cdf(samples: list[PairedSample]):
    """Exact replicate-ratio distribution over all ordered resamples."""
    n = len(samples)
    outcomes = []
    for draw in itertools.product(range(n), repeat=n):
        chosen = [samples[i] for i in draw]
        num = float(np.mean([s.ref_sim for s in chosen]))
        pooled = [b for s in chosen for b in s.baseline_sims]
        outcomes.append(num / float(np.mean(pooled)))
    values = np.sort(np.asarray(outcomes))
    return values


def assert_dkw(replicates: np.ndarray, exact_outcomes: np.ndarray, eps: float):
    b = len(replicates)
    m = len(exact_outcomes)
    for atom in np.unique(exact_outcomes):
        f_exact = float(np.sum(exact_outcomes <= atom)) / m
        f_emp = float(np.sum(replicates <= atom)) / b
        assert abs(f_emp - f_exact) <= eps, (atom, f_emp, f_exact)
        f_exact_below = float(np.sum(exact_outcomes < atom)) / m
        f_emp_below = float(np.sum(replicates < atom)) / b
        assert abs(f_emp_below - f_exact_below) <= eps


class TestBootstrap:
    def test_constant_data_zero_width(self):
        samples = paired([(0.8, (0.4,))] * 5)
        low, high = bootstrap_ci(samples, 500, seed=3)
        assert low == high == 2.0

    def test_deterministic_and_worker_independent(self):
        samples = paired([(0.9, (0.5,)), (0.4, (0.3,)), (0.7, (0.6, 0.2))])
        a = bootstrap_replicates(samples, 400, seed=11, workers=1)
        b = bootstrap_replicates(samples, 400, seed=11, workers=8)
        c = bootstrap_replicates(samples, 400, seed=11, workers=1)
        assert np.array_equal(a, b) and np.array_equal(a, c)

    def test_enumeration_oracle_n2(self):
        samples = paired([(0.8, (0.5,)), (0.6, (0.2,))])
        replicates = bootstrap_replicates(samples, 10_000, seed=5)
        assert_dkw(replicates, enumeration_cdf(samples), eps=0.03)

    def test_enumeration_oracle_n3(self):
        samples = paired([(0.8, (0.5,)), (0.6, (0.2,)), (0.9, (0.7,))])
        replicates = bootstrap_replicates(samples, 10_000, seed=6)
        assert_dkw(replicates, enumeration_cdf(samples), eps=0.03)

    def test_degenerate_replicates_retried(self):
        # one sample has a negative baseline; the all-negative resample is
        # redrawn from a derived substream rather than failing the run
        samples = paired([(0.8, (0.5,)), (0.6, (-0.2,))])
        replicates = bootstrap_replicates(samples, 2_000, seed=9)
        assert np.all(np.isfinite(replicates))
        assert np.all(replicates > 0)

    def test_degenerate_bootstrap_error(self):
        samples = paired([(0.8, (-0.5,)), (0.6, (-0.2,))])
        with pytest.raises(DegenerateBootstrapError):
            bootstrap_replicates(samples, 10, seed=1)

    def test_order_insensitive_after_canonical_sort(self):
        corpus, refs, store = build_exact_ratio_fixture()
        forward = compute_ratio_set(refs, store, "fix", k=1, b=200, seed=17, corpus=corpus)
        backward = compute_ratio_set(
            list(reversed(refs)), store, "fix", k=1, b=200, seed=17, corpus=corpus
        )
        assert forward == backward


class TestPairedSamplesAndRatioSet:
    def test_exact_fixture_is_two(self):
        corpus, refs, store = build_exact_ratio_fixture()
        results = compute_ratio_set(refs, store, "fix", k=1, b=300, seed=1, corpus=corpus)
        assert set(results) == {Scope.WITHIN_JEWISH, Scope.WITHIN_CHRISTIAN, Scope.ACROSS}
        for res in results.values():
            assert res.ratio == 2.0
            assert res.ci_low == res.ci_high == 2.0
            assert res.n_refs == 2 and res.dropped == 0
            assert res.baseline_k == 1 and res.bootstrap_b == 300 and res.seed == 1

    def test_repeated_calls_bit_identical(self):
        corpus, refs, store = build_exact_ratio_fixture()
        runs = [
            compute_ratio_set(refs, store, "fix", k=2, b=250, seed=13, corpus=corpus,
                              workers=w)
            for w in (1, 1, 4)
        ]
        assert runs[0] == runs[1] == runs[2]

    def test_chapter_index_matches_corpus_universe(self):
        corpus, refs, store = build_exact_ratio_fixture()
        with_corpus = compute_ratio_set(refs, store, "fix", k=1, b=100, seed=2, corpus=corpus)
        from_store = compute_ratio_set(refs, store, "fix", k=1, b=100, seed=2)
        assert with_corpus == from_store

    def test_missing_embedding_named(self):
        corpus, refs, store = build_exact_ratio_fixture()
        bad = [ref("GEN.1.1", "HEB.9.9", scope=Scope.ACROSS)]
        with pytest.raises(MissingEmbeddingError, match=r"HEB\.9\.9"):
            compute_ratio_set(bad, store, "fix", k=1, b=10, seed=0, corpus=corpus)

    def test_dropped_refs_counted(self):
        # one pair whose endpoints are both sole verses of their chapters
        corpus, refs, store = build_exact_ratio_fixture()
        u, v = exact_unit_pair(0.9)
        store.insert("fix", vr("ISA.9.1"), v, raw=True)
        store.insert("fix", vr("HEB.9.1"), u, raw=True)
        verses = dict(corpus.verses)
        verses[vr("ISA.9.1")] = "lonely"
        verses[vr("HEB.9.1")] = "lonely too"
        corpus2 = make_corpus(
            {str(k): t for k, t in verses.items()}, id="fix"
        )
        refs2 = refs + [ref("ISA.9.1", "HEB.9.1", scope=Scope.ACROSS)]
        results = compute_ratio_set(refs2, store, "fix", k=1, b=100, seed=3, corpus=corpus2)
        assert results[Scope.ACROSS].n_refs == 2
        assert results[Scope.ACROSS].dropped == 1
        assert results[Scope.ACROSS].ratio == 2.0

    def test_baseline_refs_recorded(self):
        corpus, refs, store = build_exact_ratio_fixture()
        samples, dropped = build_paired_samples(
            refs[:2], store, "fix", corpus, k=3, seed=4
        )
        assert dropped == 0
        for s in samples:
            assert len(s.baseline_sims) == 3
            assert all(side == "first" for side in s.swapped_sides)
            assert all(r.book == s.ref.first.book for r in s.baseline_refs)

    def test_structured_store_detects_signal(self):
        # verse pairs built nearly parallel: ratio > 1 with CI excluding 1
        rng = np.random.default_rng(77)
        corpus = grid_corpus({"GEN": (6, 5), "MAT": (6, 5)})
        store = EmbeddingStore(dim=32)
        offset = np.zeros(32)
        offset[0] = 4.0
        refs = []
        for ch in range(1, 7):
            for v in range(1, 6):
                base = rng.standard_normal(32) + offset
                store.insert("s", vr(f"GEN.{ch}.{v}"), base)
                store.insert("s", vr(f"MAT.{ch}.{v}"), base + 0.35 * rng.standard_normal(32))
        for ch in range(1, 7):
            for v in range(1, 6, 2):
                refs.append(ref(f"GEN.{ch}.{v}", f"MAT.{ch}.{v}"))
        results = compute_ratio_set(refs, store, "s", k=1, b=2_000, seed=5, corpus=corpus)
        res = results[Scope.ACROSS]
        assert res.ratio > 1.0
        assert res.ci_low > 1.0


class TestShiftTable:
    def build(self):
        store = EmbeddingStore(dim=4)
        pairs = {
            ("GEN.1.1", "MAT.1.1"): (0.332, 0.656),
            ("ISA.2.1", "HEB.3.1"): (0.5, 0.55),
        }
        refs = []
        for (a_tok, b_tok), (s_src, s_tgt) in pairs.items():
            u_src, v_src = exact_unit_pair(s_src)
            u_tgt, v_tgt = exact_unit_pair(s_tgt)
            store.insert("src", vr(a_tok), v_src, raw=True)
            store.insert("src", vr(b_tok), u_src, raw=True)
            store.insert("tgt", vr(a_tok), v_tgt, raw=True)
            store.insert("tgt", vr(b_tok), u_tgt, raw=True)
            refs.append(ref(a_tok, b_tok))
        return refs, store

    def test_exact_shift_values_and_ranking(self):
        refs, store = self.build()
        records = shift_table(refs, store, "src", "tgt")
        assert len(records) == 2
        top = records[0]
        assert top.sim_source == 0.332 and top.sim_target == 0.656
        assert abs(top.delta - 0.324) < 1e-9
        assert abs(records[0].delta) >= abs(records[1].delta)

    def test_same_corpus_all_zero(self):
        refs, store = self.build()
        records = shift_table(refs, store, "src", "src")
        assert all(r.delta == 0.0 for r in records)

    def test_tie_break_by_verse_order(self):
        store = EmbeddingStore(dim=4)
        for a_tok, b_tok in (("GEN.2.1", "MAT.1.1"), ("GEN.1.1", "MAT.2.1")):
            u1, v1 = exact_unit_pair(0.3)
            u2, v2 = exact_unit_pair(0.4)
            store.insert("src", vr(a_tok), v1, raw=True)
            store.insert("src", vr(b_tok), u1, raw=True)
            store.insert("tgt", vr(a_tok), v2, raw=True)
            store.insert("tgt", vr(b_tok), u2, raw=True)
        refs = [ref("GEN.2.1", "MAT.1.1"), ref("GEN.1.1", "MAT.2.1")]
        records = shift_table(refs, store, "src", "tgt")
        assert [str(r.ref.first) for r in records] == ["GEN.1.1", "GEN.2.1"]

    def test_missing_embedding_named(self):
        refs, store = self.build()
        refs.append(ref("GEN.9.9", "MAT.9.9"))
        with pytest.raises(MissingEmbeddingError, match=r"GEN\.9\.9"):
            shift_table(refs, store, "src", "tgt")

    sim_values = st.floats(-0.9375, 0.9375, width=32).map(
        lambda x: 0.0 if abs(x) < 1e-6 else float(x)
    )

    @given(st.lists(st.tuples(sim_values, sim_values), min_size=1, max_size=12, unique=True))
    @settings(max_examples=25, deadline=None)
    def test_ranking_monotone_and_length_preserving(self, sims):
        store = EmbeddingStore(dim=4)
        refs = []
        for i, (s_src, s_tgt) in enumerate(sims):
            a_tok, b_tok = f"GEN.{i + 1}.1", f"MAT.{i + 1}.1"
            u_src, v_src = exact_unit_pair(s_src)
            u_tgt, v_tgt = exact_unit_pair(s_tgt)
            store.insert("src", vr(a_tok), v_src, raw=True)
            store.insert("src", vr(b_tok), u_src, raw=True)
            store.insert("tgt", vr(a_tok), v_tgt, raw=True)
            store.insert("tgt", vr(b_tok), u_tgt, raw=True)
            refs.append(ref(a_tok, b_tok))
        records = shift_table(refs, store, "src", "tgt")
        assert len(records) == len(refs)
        deltas = [abs(r.delta) for r in records]
        assert deltas == sorted(deltas, reverse=True)


class TestChapterIndex:
    def test_from_refs(self):
        index = ChapterIndex([vr("GEN.1.2"), vr("GEN.1.1"), vr("GEN.2.1")])
        assert index.chapter_verses("GEN", 1) == [vr("GEN.1.1"), vr("GEN.1.2")]
        assert index.chapter_verses("GEN", 3) == []

    def test_from_store(self):
        store = EmbeddingStore(dim=2)
        store.insert("c", vr("GEN.1.1"), [1.0, 0.0])
        store.insert("c", vr("GEN.1.2"), [0.0, 1.0])
        store.insert("other", vr("GEN.1.3"), [1.0, 1.0])
        index = ChapterIndex.from_store(store, "c")
        assert index.chapter_verses("GEN", 1) == [vr("GEN.1.1"), vr("GEN.1.2")]
