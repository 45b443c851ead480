"""Report files: ratio tables, reference summaries, shift tables, score ledger.

Every float is rendered with Python's shortest round-trip representation in
both CSV and JSON, so reproducibility checks can compare bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from . import __version__
from .corpus import Corpus
from .crossrefs import FilteredRefs, ParsedCrossRefs, Scope
from .errors import ParseError
from .metrics import RatioResult, ShiftRecord
from .config import AnalysisConfig

SCOPE_ORDER = (Scope.WITHIN_JEWISH, Scope.WITHIN_CHRISTIAN, Scope.ACROSS)

RATIO_COLUMNS = (
    "corpus_id",
    "provenance",
    "language",
    "scope",
    "ratio",
    "ci_low",
    "ci_high",
    "n_refs",
    "dropped",
    "seed",
)


def fmt(value: object) -> str:
    """Shortest round-trip decimal for floats; str() for the rest."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RatioRow:
    corpus_id: str
    provenance: str
    language: str
    scope: str
    ratio: float
    ci_low: float
    ci_high: float
    n_refs: int
    dropped: int
    seed: int

    def as_dict(self) -> dict:
        return {col: getattr(self, col) for col in RATIO_COLUMNS}


def ratio_rows(corpus: Corpus, results: dict[Scope, RatioResult]) -> list[RatioRow]:
    rows = []
    for scope in SCOPE_ORDER:
        if scope not in results:
            continue
        res = results[scope]
        rows.append(
            RatioRow(
                corpus_id=corpus.id,
                provenance=corpus.provenance.value,
                language=corpus.language,
                scope=scope.value,
                ratio=res.ratio,
                ci_low=res.ci_low,
                ci_high=res.ci_high,
                n_refs=res.n_refs,
                dropped=res.dropped,
                seed=res.seed,
            )
        )
    return rows


def write_ratio_csv(rows: Sequence[RatioRow], sink: IO[str]) -> None:
    sink.write(",".join(RATIO_COLUMNS) + "\n")
    for row in rows:
        sink.write(",".join(fmt(getattr(row, col)) for col in RATIO_COLUMNS) + "\n")


def write_ratio_outputs(rows: Sequence[RatioRow], out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "ratios.csv"
    json_path = out_dir / "ratios.json"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        write_ratio_csv(rows, fh)
    payload = {"ratios": [row.as_dict() for row in rows]}
    json_path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return csv_path, json_path


def read_ratio_rows(path: str | Path) -> list[RatioRow]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return [RatioRow(**row) for row in doc["ratios"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path} is not a ratios.json file: {exc}") from None


def refs_summary(
    parsed: ParsedCrossRefs, filtered: FilteredRefs
) -> dict[str, int]:
    """The count summary emitted next to the filtered reference list."""
    by_scope = {scope: 0 for scope in SCOPE_ORDER}
    for ref in filtered.refs:
        by_scope[ref.scope] += 1
    return {
        "total": len(filtered.refs),
        "within_jewish": by_scope[Scope.WITHIN_JEWISH],
        "within_christian": by_scope[Scope.WITHIN_CHRISTIAN],
        "across": by_scope[Scope.ACROSS],
        "skipped_ranges": parsed.skipped_ranges,
        "unresolvable": filtered.unresolvable,
        "below_threshold": filtered.below_threshold,
    }


def write_refs_outputs(
    parsed: ParsedCrossRefs,
    filtered: FilteredRefs,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = out_dir / "refs.tsv"
    with open(tsv_path, "w", encoding="utf-8", newline="") as fh:
        for ref in filtered.refs:
            fh.write(f"{ref.first}\t{ref.second}\t{ref.votes}\t{ref.scope.value}\n")
    summary_path = out_dir / "refs_summary.json"
    summary_path.write_text(
        json.dumps(refs_summary(parsed, filtered), indent=2) + "\n", "utf-8"
    )
    return tsv_path, summary_path


SHIFT_COLUMNS = (
    "first",
    "second",
    "votes",
    "scope",
    "sim_source",
    "sim_target",
    "delta",
    "first_source_text",
    "second_source_text",
    "first_target_text",
    "second_target_text",
)


def write_shift_table(
    records: Sequence[ShiftRecord],
    source: Corpus,
    target: Corpus,
    top_n: int,
    sink: IO[str],
) -> int:
    """Write the top_n largest shifts with both verse texts inlined."""
    if top_n < 0:
        raise ValueError("top_n must be >= 0")
    sink.write("\t".join(SHIFT_COLUMNS) + "\n")
    written = 0
    for rec in records[:top_n]:
        ref = rec.ref
        sink.write(
            "\t".join(
                (
                    str(ref.first),
                    str(ref.second),
                    str(ref.votes),
                    ref.scope.value,
                    fmt(rec.sim_source),
                    fmt(rec.sim_target),
                    fmt(rec.delta),
                    source.resolve(ref.first) or "",
                    source.resolve(ref.second) or "",
                    target.resolve(ref.first) or "",
                    target.resolve(ref.second) or "",
                )
            )
            + "\n"
        )
        written += 1
    return written


@dataclass(frozen=True)
class QualityScore:
    source: str
    target_lang: str
    score: float


def parse_scores(lines: Iterable[str]) -> list[QualityScore]:
    """Externally produced quality scores: CSV ``source,target_lang,score``."""
    scores = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if lineno == 1 and line.lower().replace(" ", "") == "source,target_lang,score":
            continue
        cols = line.split(",")
        if len(cols) != 3:
            raise ParseError(f"expected 3 comma-separated columns, got {len(cols)}", line=lineno)
        source, target_lang, score_tok = (c.strip() for c in cols)
        try:
            score = float(score_tok)
        except ValueError:
            raise ParseError(f"score must be a number, got {score_tok!r}", line=lineno) from None
        if not source or not target_lang:
            raise ParseError("source and target_lang must be non-empty", line=lineno)
        scores.append(QualityScore(source=source, target_lang=target_lang, score=score))
    return scores


def load_scores(path: str | Path) -> list[QualityScore]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scores(fh)


def write_scores_ledger(scores: Sequence[QualityScore], out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "scores.json"
    payload = {
        "scores": [
            {"source": s.source, "target_lang": s.target_lang, "score": s.score}
            for s in scores
        ]
    }
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return path


def write_run_record(config: AnalysisConfig, command: str, out_dir: str | Path) -> Path:
    """Echo the exact configuration so the run can be reproduced from it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "run.json"
    payload = {
        "tool": "intertext",
        "version": __version__,
        "command": command,
        "seed": config.seed,
        "config": [[k, v] for k, v in config.entries],
    }
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return path
