"""Few-shot translation prompting against an external chat-completion service.

The prompt is a fixed five-item skeleton: four exemplar translation pairs
drawn from the parallel corpora, then the verse to translate, every text in
double quotes, ending with a bare target-language cue. Model output is
post-processed by taking the first balanced double-quoted span (with a
first-line fallback when the model produced no quotes at all).

The service itself is behind a one-method client interface (prompt in,
text out) so the harness runs identically against mocks and real endpoints.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Protocol, Sequence

import requests

from .corpus import Corpus, Provenance, VerseRef
from .errors import (
    EmptyTranslationError,
    InsufficientExemplarsError,
    QuoteCollisionError,
    RemoteError,
)
from .rng import stream

logger = logging.getLogger(__name__)

EXEMPLAR_COUNT = 4
LLM_TOKEN_ENV = "INTERTEXT_LLM_TOKEN"


@dataclass(frozen=True)
class PromptTemplate:
    source_lang_name: str
    target_lang_name: str
    exemplars: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(self.exemplars) != EXEMPLAR_COUNT:
            raise ValueError(f"exactly {EXEMPLAR_COUNT} exemplars required")
        for src, tgt in self.exemplars:
            if not src or not tgt:
                raise ValueError("exemplar texts must be non-empty")
            if '"' in src or '"' in tgt:
                raise QuoteCollisionError(
                    "exemplar text contains a double quote; normalize quotes first"
                )


@dataclass(frozen=True)
class GenerationConfig:
    endpoint: str
    model_name: str
    max_new_tokens: int = 100
    retries: int = 2
    timeout: float = 120.0

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


def build_prompt(template: PromptTemplate, input_text: str) -> str:
    """Render the five-item few-shot prompt for one input text."""
    if not input_text:
        raise ValueError("input_text must be non-empty")
    if '"' in input_text:
        raise QuoteCollisionError(
            "input text contains a double quote; normalize quotes first"
        )
    src, tgt = template.source_lang_name, template.target_lang_name
    parts = [f"Translate the following {src} phrases into {tgt}:", ""]
    for i, (ex_src, ex_tgt) in enumerate(template.exemplars, start=1):
        parts.append(f'{i}. {src}: "{ex_src}"')
        parts.append(f'{tgt}: "{ex_tgt}"')
        parts.append("")
    parts.append(f"Now, translate this {src} phrase:")
    parts.append("")
    parts.append(f'{EXEMPLAR_COUNT + 1}. {src}: "{input_text}"')
    parts.append("")
    parts.append(f"{tgt}:")
    return "\n".join(parts)


class Extraction(NamedTuple):
    text: str
    fallback: bool


def extract_translation(raw_output: str) -> Extraction:
    """Contents of the first balanced double-quoted span in the output.

    Without any balanced span the first line, trimmed, is used instead and
    flagged as a fallback. An empty result is an error (the verse should be
    retried).
    """
    start = raw_output.find('"')
    if start != -1:
        end = raw_output.find('"', start + 1)
        if end != -1:
            text = raw_output[start + 1 : end]
            if not text.strip():
                raise EmptyTranslationError("first quoted span is empty")
            return Extraction(text=text, fallback=False)
    text = raw_output.split("\n", 1)[0].strip()
    if not text:
        raise EmptyTranslationError("output has no quoted span and an empty first line")
    return Extraction(text=text, fallback=True)


def select_exemplars(
    pairs: Sequence[tuple[str, str]], seed: int, *parts: int | str
) -> list[tuple[str, str]]:
    """Choose 4 distinct pairs uniformly without replacement, seed-deterministic.

    Extra `parts` select independent draws from the same seed (e.g. one per
    verse when reselecting).
    """
    if len(pairs) < EXEMPLAR_COUNT:
        raise InsufficientExemplarsError(
            f"need at least {EXEMPLAR_COUNT} exemplar pairs, got {len(pairs)}"
        )
    rng = stream(seed, "exemplars", *parts)
    chosen = rng.choice(len(pairs), size=EXEMPLAR_COUNT, replace=False)
    return [pairs[int(i)] for i in chosen]


def normalize_quotes(text: str) -> str:
    """Replace straight double quotes with typographic ones, pairwise."""
    out = []
    opening = True
    for ch in text:
        if ch == '"':
            out.append("“" if opening else "”")
            opening = not opening
        else:
            out.append(ch)
    return "".join(out)


class CompletionClient(Protocol):
    def complete(self, prompt: str, max_new_tokens: int) -> str: ...


class HttpCompletionClient:
    """POSTs {"model", "prompt", "max_new_tokens"} and reads {"text": ...}."""

    def __init__(self, cfg: GenerationConfig, session: requests.Session | None = None):
        self.cfg = cfg
        self.session = session or requests.Session()

    def complete(self, prompt: str, max_new_tokens: int) -> str:
        headers = {}
        token = os.environ.get(LLM_TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self.session.post(
                self.cfg.endpoint,
                json={
                    "model": self.cfg.model_name,
                    "prompt": prompt,
                    "max_new_tokens": max_new_tokens,
                },
                headers=headers,
                timeout=self.cfg.timeout,
            )
        except requests.RequestException as exc:
            raise RemoteError(f"completion request failed: {exc}") from None
        if resp.status_code != 200:
            raise RemoteError(
                f"{self.cfg.endpoint} answered {resp.status_code}: {resp.text[:200]}"
            )
        try:
            text = resp.json()["text"]
        except (ValueError, KeyError) as exc:
            raise RemoteError(f"malformed completion response: {exc}") from None
        if not isinstance(text, str):
            raise RemoteError("completion response 'text' is not a string")
        return text


@dataclass
class VerseFailure:
    corpus: str
    ref: VerseRef
    reason: str
    attempts: int


@dataclass
class TranslationRun:
    corpus: Corpus
    failures: list[VerseFailure]
    fallback_count: int
    exemplar_refs: tuple[VerseRef, ...]


def write_failure_report(failures: Sequence[VerseFailure], path: str | Path) -> None:
    """One JSON object per failed verse, one per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for f in failures:
            fh.write(
                json.dumps(
                    {
                        "corpus": f.corpus,
                        "ref": str(f.ref),
                        "reason": f.reason,
                        "attempts": f.attempts,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


_WS_RUN = re.compile(r"[\t\r\n]+")


def translate_corpus(
    source: Corpus,
    parallel_refs: Corpus,
    cfg: GenerationConfig,
    seed: int,
    *,
    source_lang_name: str,
    target_lang_name: str,
    target_language: str,
    output_id: str | None = None,
    client: CompletionClient | None = None,
    per_verse_exemplars: bool = False,
    retry_pause: float = 0.0,
) -> TranslationRun:
    """Translate every source verse through the few-shot prompt.

    Exemplars are drawn once per run from the verses shared between source
    and parallel corpora (reselected per verse when requested, and always
    reselected for a verse that is itself an exemplar, so no verse sees its
    own reference translation). Verses that still have no usable extraction
    after the retry budget are omitted and reported.
    """
    shared = sorted(set(source.verses) & set(parallel_refs.verses))
    if len(shared) < EXEMPLAR_COUNT + 1:
        raise InsufficientExemplarsError(
            f"need at least {EXEMPLAR_COUNT + 1} shared verses for an exemplar "
            f"pool, got {len(shared)}"
        )
    if client is None:
        client = HttpCompletionClient(cfg)

    def pair_for(ref: VerseRef) -> tuple[str, str]:
        return (
            normalize_quotes(source.verses[ref]),
            normalize_quotes(parallel_refs.verses[ref]),
        )

    run_exemplar_idx = stream(seed, "exemplars").choice(
        len(shared), size=EXEMPLAR_COUNT, replace=False
    )
    run_exemplar_refs = tuple(shared[int(i)] for i in run_exemplar_idx)

    translated: dict[VerseRef, str] = {}
    failures: list[VerseFailure] = []
    fallbacks = 0
    for ref in sorted(source.verses):
        if per_verse_exemplars or ref in run_exemplar_refs:
            pool_refs = [r for r in shared if r != ref]
            if len(pool_refs) < EXEMPLAR_COUNT:
                failures.append(
                    VerseFailure(source.id, ref, "exemplar pool too small", 0)
                )
                continue
            rng = stream(seed, "exemplars", str(ref))
            idx = rng.choice(len(pool_refs), size=EXEMPLAR_COUNT, replace=False)
            exemplar_refs = tuple(pool_refs[int(i)] for i in idx)
        else:
            exemplar_refs = run_exemplar_refs
        template = PromptTemplate(
            source_lang_name=source_lang_name,
            target_lang_name=target_lang_name,
            exemplars=tuple(pair_for(r) for r in exemplar_refs),
        )
        prompt = build_prompt(template, normalize_quotes(source.verses[ref]))
        attempts = 0
        last_reason = "no attempts made"
        for attempt in range(cfg.retries + 1):
            attempts = attempt + 1
            if attempt and retry_pause:
                time.sleep(retry_pause)
            try:
                raw = client.complete(prompt, cfg.max_new_tokens)
                extraction = extract_translation(raw)
            except (RemoteError, EmptyTranslationError) as exc:
                last_reason = str(exc)
                continue
            text = _WS_RUN.sub(" ", extraction.text).strip()
            if not text:
                last_reason = "extraction was whitespace only"
                continue
            if extraction.fallback:
                fallbacks += 1
            translated[ref] = text
            break
        else:
            logger.warning("verse %s failed after %d attempts: %s", ref, attempts, last_reason)
            failures.append(VerseFailure(source.id, ref, last_reason, attempts))

    out = Corpus(
        id=output_id or f"{source.id}-{target_language}-mt",
        language=target_language,
        provenance=Provenance.MACHINE,
        verses=translated,
    )
    return TranslationRun(
        corpus=out,
        failures=failures,
        fallback_count=fallbacks,
        exemplar_refs=run_exemplar_refs,
    )
