"""Run configuration: a flat key=value file plus CLI overrides.

The file format is one ``key = value`` pair per line, ``#`` comments, blank
lines ignored; values may be quoted. ``corpus``, ``versification`` and
``embeddings`` may repeat. Relative paths are resolved against the config
file's directory at load time, so the echoed configuration in ``run.json``
is location-independent and re-running from it reproduces outputs
byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_REPEATABLE = {"corpus", "versification", "embeddings"}
_PATH_KEYS = {"versification", "testaments", "crossrefs", "book_aliases", "scores", "out"}
_INT_KEYS = {
    "threshold": 50,
    "baseline_k": 1,
    "bootstrap_b": 10_000,
    "seed": 0,
    "workers": 1,
    "embed_batch_size": 32,
    "llm_max_new_tokens": 100,
    "llm_retries": 2,
}
_STRING_KEYS = {
    "llm_endpoint",
    "llm_model",
    "translate_source",
    "translate_refs",
    "translate_out_id",
    "source_lang_name",
    "target_lang_name",
    "target_language",
}
_KNOWN = _REPEATABLE | _PATH_KEYS | set(_INT_KEYS) | _STRING_KEYS


@dataclass(frozen=True)
class CorpusSpec:
    path: str
    id: str
    language: str
    provenance: str


@dataclass
class AnalysisConfig:
    """Parsed configuration; `entries` preserves the exact echoed form."""

    entries: list[tuple[str, str]]
    corpora: list[CorpusSpec] = field(default_factory=list)
    versification: list[str] = field(default_factory=list)
    embeddings: list[str] = field(default_factory=list)
    testaments: str | None = None
    crossrefs: str | None = None
    book_aliases: str | None = None
    scores: str | None = None
    out: str = "out"
    threshold: int = 50
    baseline_k: int = 1
    bootstrap_b: int = 10_000
    seed: int = 0
    workers: int = 1
    embed_batch_size: int = 32
    llm_endpoint: str | None = None
    llm_model: str | None = None
    llm_max_new_tokens: int = 100
    llm_retries: int = 2
    translate_source: str | None = None
    translate_refs: str | None = None
    translate_out_id: str | None = None
    source_lang_name: str | None = None
    target_lang_name: str | None = None
    target_language: str | None = None

    @classmethod
    def from_entries(cls, entries: list[tuple[str, str]]) -> "AnalysisConfig":
        cfg = cls(entries=list(entries))
        for key, value in entries:
            if key not in _KNOWN:
                raise ConfigError(f"unknown config key {key!r}")
            if key == "corpus":
                parts = value.split("|")
                if len(parts) != 4:
                    raise ConfigError(
                        f"corpus entry must be path|id|language|provenance, got {value!r}"
                    )
                cfg.corpora.append(CorpusSpec(*[p.strip() for p in parts]))
            elif key in ("versification", "embeddings"):
                getattr(cfg, key).append(value)
            elif key in _INT_KEYS:
                try:
                    setattr(cfg, key, int(value))
                except ValueError:
                    raise ConfigError(f"{key} must be an integer, got {value!r}") from None
            else:
                setattr(cfg, key, value)
        if cfg.threshold < 0:
            raise ConfigError("threshold must be >= 0")
        if cfg.baseline_k < 1 or cfg.bootstrap_b < 1 or cfg.workers < 1:
            raise ConfigError("baseline_k, bootstrap_b and workers must be >= 1")
        if cfg.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "AnalysisConfig":
        """Load a key=value file, or the config echo inside a run.json."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            try:
                doc = json.loads(text)
                raw = [(str(k), str(v)) for k, v in doc["config"]]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path} is not a run.json with a config echo: {exc}") from None
            return cls.from_entries(raw)
        entries: list[tuple[str, str]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            entries.append((key, _resolve(key, value, path.parent)))
        return cls.from_entries(entries)

    def with_overrides(self, **overrides: object) -> "AnalysisConfig":
        """Apply CLI overrides; the echoed entries are updated to match."""
        entries = list(self.entries)
        for key, value in overrides.items():
            if value is None:
                continue
            entries = [(k, v) for k, v in entries if k != key]
            entries.append((key, str(value)))
        return AnalysisConfig.from_entries(entries)

    def require_paths(self) -> None:
        """Every referenced input path must exist at run start."""
        paths = [(f"corpus {spec.id}", spec.path) for spec in self.corpora]
        paths += [("versification", p) for p in self.versification]
        paths += [
            ("embeddings", p)
            for p in self.embeddings
            if not p.startswith(("http://", "https://"))
        ]
        for key in ("testaments", "crossrefs", "book_aliases", "scores"):
            value = getattr(self, key)
            if value:
                paths.append((key, value))
        missing = [f"{label}: {path}" for label, path in paths if not Path(path).exists()]
        if missing:
            raise ConfigError("missing input files: " + "; ".join(missing))


def _resolve(key: str, value: str, base: Path) -> str:
    """Make path-valued entries absolute relative to the config file."""
    if key in _PATH_KEYS:
        return str((base / value).resolve())
    if key == "corpus":
        parts = value.split("|")
        if parts and parts[0].strip():
            parts[0] = str((base / parts[0].strip()).resolve())
        return "|".join(parts)
    if key == "embeddings" and not value.startswith(("http://", "https://")):
        return str((base / value).resolve())
    return value
