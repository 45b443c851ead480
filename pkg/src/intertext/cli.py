"""Command-line surface: refs | embed | ratio | shift | chart | translate | scores.

Each subcommand reads the shared config file, applies flag overrides,
writes its documented output files under the output directory, and records
the exact configuration in ``run.json`` so any run can be replayed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .chart import render_ratio_chart
from .config import AnalysisConfig
from .corpus import (
    Corpus,
    apply_versification,
    dump_corpus,
    load_corpus,
    load_testament_spec,
    load_versification_map,
)
from .crossrefs import filter_refs, fold_bidirectional, load_book_aliases, load_crossrefs
from .errors import ConfigError, IntertextError, MissingEmbeddingError
from .metrics import compute_ratio_set, shift_table
from .report import (
    RatioRow,
    load_scores,
    ratio_rows,
    read_ratio_rows,
    write_ratio_outputs,
    write_refs_outputs,
    write_run_record,
    write_scores_ledger,
    write_shift_table,
)
from .store import EmbeddingStore, fetch_remote, load_store_file, save_store_file
from .translate import GenerationConfig, translate_corpus, write_failure_report

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intertext",
        description="Measure corpus-level intertextuality and translation effects.",
    )
    parser.add_argument("--version", action="version", version=f"intertext {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="key=value config file or run.json")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threshold", type=int, default=None)
        p.add_argument("--baseline-k", type=int, default=None, dest="baseline_k")
        p.add_argument("--bootstrap", type=int, default=None, dest="bootstrap_b")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")

    p_refs = sub.add_parser("refs", help="filter and partition the cross-reference set")
    common(p_refs)

    p_embed = sub.add_parser("embed", help="fetch embeddings from a remote service")
    common(p_embed)

    p_ratio = sub.add_parser("ratio", help="intertextuality ratios with bootstrap CIs")
    common(p_ratio)

    p_shift = sub.add_parser("shift", help="rank references by translation similarity shift")
    common(p_shift)
    p_shift.add_argument("--source", required=True, help="source corpus id")
    p_shift.add_argument("--target", required=True, help="target corpus id")
    p_shift.add_argument("--top-n", type=int, default=20, dest="top_n")

    p_chart = sub.add_parser("chart", help="render the ratio chart as SVG")
    common(p_chart)
    p_chart.add_argument("--ratios", default=None, help="path to ratios.json")

    p_tr = sub.add_parser("translate", help="machine-translate a corpus via the LLM endpoint")
    common(p_tr)

    p_scores = sub.add_parser("scores", help="record externally computed quality scores")
    common(p_scores)
    p_scores.add_argument("--scores", default=None, help="CSV of source,target_lang,score")
    return parser


def _config_from_args(args: argparse.Namespace) -> AnalysisConfig:
    cfg = AnalysisConfig.load(args.config).with_overrides(
        seed=args.seed,
        threshold=args.threshold,
        baseline_k=getattr(args, "baseline_k", None),
        bootstrap_b=getattr(args, "bootstrap_b", None),
        workers=getattr(args, "workers", None),
        out=args.out,
    )
    cfg.require_paths()
    return cfg


def _load_corpora(cfg: AnalysisConfig) -> dict[str, Corpus]:
    if not cfg.corpora:
        raise ConfigError("config declares no corpus entries")
    maps = [load_versification_map(path) for path in cfg.versification]
    by_corpus = {m.corpus_id: m for m in maps}
    corpora: dict[str, Corpus] = {}
    for spec in cfg.corpora:
        if spec.id in corpora:
            raise ConfigError(f"corpus id {spec.id!r} declared twice")
        corpus = load_corpus(spec.path, id=spec.id, language=spec.language, provenance=spec.provenance)
        if spec.id in by_corpus:
            corpus = apply_versification(corpus, by_corpus.pop(spec.id))
        corpora[spec.id] = corpus
    for orphan in by_corpus:
        logger.warning("versification map for unknown corpus %r ignored", orphan)
    return corpora


def _filtered_refs(cfg: AnalysisConfig, corpora: dict[str, Corpus]):
    if not cfg.crossrefs:
        raise ConfigError("config lacks a crossrefs path")
    if not cfg.testaments:
        raise ConfigError("config lacks a testaments path")
    aliases = load_book_aliases(cfg.book_aliases) if cfg.book_aliases else None
    parsed = load_crossrefs(cfg.crossrefs, aliases=aliases)
    folded = fold_bidirectional(parsed.references)
    spec = load_testament_spec(cfg.testaments)
    filtered = filter_refs(folded, cfg.threshold, spec, list(corpora.values()))
    return parsed, folded, filtered


def _load_store(cfg: AnalysisConfig, corpora: dict[str, Corpus]) -> EmbeddingStore:
    if not cfg.embeddings:
        raise ConfigError("config lacks an embeddings source (ITXE path or endpoint)")
    if any(e.startswith(("http://", "https://")) for e in cfg.embeddings):
        if len(cfg.embeddings) != 1:
            raise ConfigError("a remote embeddings source must be the only one")
        return _fetch_store(cfg, corpora, cfg.embeddings[0])
    store: EmbeddingStore | None = None
    for path in cfg.embeddings:
        part = load_store_file(path)
        if store is None:
            store = part
        else:
            store.merge(part)
    assert store is not None
    return store


def _fetch_store(cfg: AnalysisConfig, corpora: dict[str, Corpus], endpoint: str) -> EmbeddingStore:
    store: EmbeddingStore | None = None
    for corpus in corpora.values():
        refs = corpus.refs()
        vectors = fetch_remote(
            [corpus.verses[r] for r in refs], endpoint, cfg.embed_batch_size
        )
        for ref, vec in zip(refs, vectors):
            if store is None:
                store = EmbeddingStore(dim=vec.size)
            store.insert(corpus.id, ref, vec)
    if store is None:
        raise ConfigError("no verses to embed")
    return store


def _check_coverage(store: EmbeddingStore, corpora: dict[str, Corpus]) -> None:
    missing = []
    for corpus in corpora.values():
        for ref in corpus.refs():
            if store.get(corpus.id, ref) is None:
                missing.append(f"{corpus.id}|{ref}")
                if len(missing) >= 20:
                    break
        if len(missing) >= 20:
            break
    if missing:
        raise MissingEmbeddingError(
            "store lacks embeddings for: " + ", ".join(missing)
        )


def cmd_refs(cfg: AnalysisConfig) -> int:
    corpora = _load_corpora(cfg)
    parsed, _, filtered = _filtered_refs(cfg, corpora)
    tsv_path, summary_path = write_refs_outputs(parsed, filtered, cfg.out)
    write_run_record(cfg, "refs", cfg.out)
    print(
        f"kept {len(filtered.refs)} references "
        f"(skipped ranges {parsed.skipped_ranges}, below threshold "
        f"{filtered.below_threshold}, unresolvable {filtered.unresolvable}) "
        f"-> {tsv_path}, {summary_path}"
    )
    return 0


def cmd_embed(cfg: AnalysisConfig) -> int:
    corpora = _load_corpora(cfg)
    endpoint = next((e for e in cfg.embeddings if e.startswith(("http://", "https://"))), None)
    if endpoint is None:
        raise ConfigError("embed needs an http(s) embeddings endpoint in the config")
    store = _fetch_store(cfg, corpora, endpoint)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "embeddings.itxe"
    save_store_file(store, path)
    write_run_record(cfg, "embed", cfg.out)
    print(f"stored {len(store)} vectors (dim {store.dim}) -> {path}")
    return 0


def cmd_ratio(cfg: AnalysisConfig) -> int:
    corpora = _load_corpora(cfg)
    _, _, filtered = _filtered_refs(cfg, corpora)
    store = _load_store(cfg, corpora)
    _check_coverage(store, corpora)
    rows: list[RatioRow] = []
    for spec in cfg.corpora:
        corpus = corpora[spec.id]
        results = compute_ratio_set(
            filtered.refs,
            store,
            corpus.id,
            k=cfg.baseline_k,
            b=cfg.bootstrap_b,
            seed=cfg.seed,
            corpus=corpus,
            workers=cfg.workers,
        )
        rows.extend(ratio_rows(corpus, results))
    csv_path, json_path = write_ratio_outputs(rows, cfg.out)
    write_run_record(cfg, "ratio", cfg.out)
    for row in rows:
        half = (row.ci_high - row.ci_low) / 2.0
        print(
            f"{row.corpus_id} {row.scope}: ratio {row.ratio:.4f} "
            f"CI [{row.ci_low:.4f}, {row.ci_high:.4f}] (half-width {half:.4f}, "
            f"n={row.n_refs}, dropped={row.dropped})"
        )
    print(f"wrote {len(rows)} ratio rows -> {csv_path}, {json_path}")
    return 0


def cmd_shift(cfg: AnalysisConfig, source_id: str, target_id: str, top_n: int) -> int:
    corpora = _load_corpora(cfg)
    for cid in (source_id, target_id):
        if cid not in corpora:
            raise ConfigError(f"corpus {cid!r} is not declared in the config")
    _, _, filtered = _filtered_refs(cfg, corpora)
    store = _load_store(cfg, corpora)
    records = shift_table(filtered.refs, store, source_id, target_id)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"shift_{source_id}_{target_id}.tsv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        written = write_shift_table(records, corpora[source_id], corpora[target_id], top_n, fh)
    write_run_record(cfg, "shift", cfg.out)
    print(f"wrote {written} shift rows -> {path}")
    return 0


def cmd_chart(cfg: AnalysisConfig, ratios_path: str | None) -> int:
    path = Path(ratios_path) if ratios_path else Path(cfg.out) / "ratios.json"
    rows = read_ratio_rows(path)
    svg = render_ratio_chart(rows)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    svg_path = out_dir / "ratios.svg"
    svg_path.write_text(svg, encoding="utf-8")
    write_run_record(cfg, "chart", cfg.out)
    print(f"wrote chart -> {svg_path}")
    return 0


def cmd_translate(cfg: AnalysisConfig) -> int:
    for key in ("llm_endpoint", "llm_model", "translate_source", "translate_refs",
                "source_lang_name", "target_lang_name", "target_language"):
        if getattr(cfg, key) in (None, ""):
            raise ConfigError(f"translate needs config key {key!r}")
    corpora = _load_corpora(cfg)
    for cid in (cfg.translate_source, cfg.translate_refs):
        if cid not in corpora:
            raise ConfigError(f"corpus {cid!r} is not declared in the config")
    gen_cfg = GenerationConfig(
        endpoint=cfg.llm_endpoint,
        model_name=cfg.llm_model,
        max_new_tokens=cfg.llm_max_new_tokens,
        retries=cfg.llm_retries,
    )
    run = translate_corpus(
        corpora[cfg.translate_source],
        corpora[cfg.translate_refs],
        gen_cfg,
        cfg.seed,
        source_lang_name=cfg.source_lang_name,
        target_lang_name=cfg.target_lang_name,
        target_language=cfg.target_language,
        output_id=cfg.translate_out_id,
    )
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / f"{run.corpus.id}.tsv"
    dump_corpus(run.corpus, corpus_path)
    failures_path = out_dir / f"{run.corpus.id}.failures.jsonl"
    write_failure_report(run.failures, failures_path)
    write_run_record(cfg, "translate", cfg.out)
    print(
        f"translated {len(run.corpus)} verses ({len(run.failures)} failed, "
        f"{run.fallback_count} fallback extractions) -> {corpus_path}"
    )
    return 0


def cmd_scores(cfg: AnalysisConfig, scores_path: str | None) -> int:
    path = scores_path or cfg.scores
    if not path:
        raise ConfigError("scores needs --scores or a scores config key")
    ledger = load_scores(path)
    out_path = write_scores_ledger(ledger, cfg.out)
    write_run_record(cfg, "scores", cfg.out)
    print(f"recorded {len(ledger)} quality scores -> {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "refs":
            return cmd_refs(cfg)
        if args.command == "embed":
            return cmd_embed(cfg)
        if args.command == "ratio":
            return cmd_ratio(cfg)
        if args.command == "shift":
            return cmd_shift(cfg, args.source, args.target, args.top_n)
        if args.command == "chart":
            return cmd_chart(cfg, args.ratios)
        if args.command == "translate":
            return cmd_translate(cfg)
        if args.command == "scores":
            return cmd_scores(cfg, args.scores)
        raise ConfigError(f"unknown command {args.command!r}")
    except IntertextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
