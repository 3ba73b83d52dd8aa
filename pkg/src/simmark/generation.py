"""Watermarked generation: rejection sampling on consecutive-sentence similarity.

The generator LLM is a black box reached over HTTP (or any object with a
``complete`` method). For each new sentence we sample candidates, embed them,
and accept the first whose similarity to the previous sentence falls inside
the acceptance interval; after ``n_max`` failed candidates the last one is
accepted anyway. One document's chain is strictly sequential; distinct
documents can generate in parallel.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from . import simmetrics
from .embedding import Embedder
from .errors import (
    CandidateEmpty,
    EmbedderUnavailable,
    GeneratorUnavailable,
    InvalidRequest,
    RemoteUnavailable,
    ValidationError,
)
from .projection import PcaModel, pca_transform
from .segmentation import Sentence, SentenceSequence, first_complete_sentence, split_sentences
from .simmetrics import Interval


@dataclass
class LlmSamplingParams:
    temperature: float = 0.7
    repetition_penalty: float = 1.05
    min_new_tokens: int = 195
    max_new_tokens: int = 205

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValidationError(f"temperature must be > 0, got {self.temperature}")
        if self.min_new_tokens > self.max_new_tokens:
            raise ValidationError("min_new_tokens must not exceed max_new_tokens")


@dataclass
class GeneratorConfig:
    interval: Interval
    measure: str = simmetrics.COSINE
    use_pca: bool = False
    pca: PcaModel | None = None
    n_max: int = 100  # 25 already performs well; 100 trades speed for margin
    sampling: LlmSamplingParams = field(default_factory=LlmSamplingParams)
    llm_endpoint: str = ""
    model_id: str = ""
    batch_candidates: int = 1

    def __post_init__(self):
        simmetrics.validate_measure(self.measure)
        if self.n_max < 1:
            raise ValidationError(f"n_max must be >= 1, got {self.n_max}")
        if self.use_pca and self.pca is None:
            raise ValidationError("use_pca=True requires a fitted PCA model")
        if self.batch_candidates < 1:
            raise ValidationError("batch_candidates must be >= 1")


class Generator(Protocol):
    def complete(self, prompt: str, params: LlmSamplingParams, n: int) -> list[str]: ...


class HttpGenerator:
    """Client for ``POST {llm_endpoint}/v1/generate`` with retry/backoff."""

    def __init__(self, endpoint: str, model_id: str, timeout_ms: int = 120000,
                 max_retries: int = 3, backoff_base_s: float = 0.25,
                 session: requests.Session | None = None):
        if not endpoint:
            raise ValidationError("generator endpoint must not be empty")
        self.endpoint = endpoint
        self.model_id = model_id
        self.timeout_ms = timeout_ms
        self.max_retries = max_retries
        self._backoff_base_s = backoff_base_s
        self._session = session or requests.Session()

    def complete(self, prompt: str, params: LlmSamplingParams, n: int) -> list[str]:
        url = self.endpoint.rstrip("/") + "/v1/generate"
        payload = {
            "model": self.model_id,
            "prompt": prompt,
            "temperature": params.temperature,
            "repetition_penalty": params.repetition_penalty,
            "min_new_tokens": params.min_new_tokens,
            "max_new_tokens": params.max_new_tokens,
            "n": n,
        }
        headers = {}
        api_key = os.environ.get("SIMMARK_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_err = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self._backoff_base_s * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(url, json=payload, headers=headers,
                                          timeout=self.timeout_ms / 1000.0)
            except requests.RequestException as exc:
                last_err = str(exc)
                continue
            if resp.status_code // 100 != 2:
                last_err = f"HTTP {resp.status_code}"
                continue
            completions = resp.json().get("completions")
            if not isinstance(completions, list):
                last_err = "malformed response body"
                continue
            return [str(c) for c in completions]
        raise GeneratorUnavailable(
            f"generator at {url} failed after {self.max_retries + 1} attempts: {last_err}"
        )


@dataclass
class SentenceTraceEntry:
    attempts: int
    final_similarity: float
    accepted_in_interval: bool
    wall_ms: int

    def to_dict(self) -> dict:
        return {
            "attempts": self.attempts,
            "final_similarity": self.final_similarity,
            "accepted_in_interval": self.accepted_in_interval,
            "wall_ms": self.wall_ms,
        }


@dataclass
class GenerationTrace:
    prompt_text: str
    sentences: list[Sentence]
    entries: list[SentenceTraceEntry]

    @property
    def document(self) -> str:
        parts = [self.prompt_text.strip()] + [s.text for s in self.sentences]
        return " ".join(parts)

    def mean_attempts(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.attempts for e in self.entries) / len(self.entries)

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt_text,
            "sentences": [s.text for s in self.sentences],
            "entries": [e.to_dict() for e in self.entries],
            "document": self.document,
            "mean_attempts": self.mean_attempts(),
        }


def rejection_sample(
    fetch: Callable[[int], list[str]],
    score: Callable[[str], float],
    interval: Interval,
    n_max: int,
    batch: int = 1,
) -> tuple[str, int, float]:
    """The core accept/resample loop shared by generation and simulation.

    ``fetch(n)`` returns up to n candidate strings; ``score`` maps a candidate
    to its similarity. Candidates are judged in deterministic order. Returns
    (accepted, attempts, final_similarity): the first in-interval candidate,
    or the last candidate once ``n_max`` have been examined.
    """
    attempts = 0
    last_text: str | None = None
    last_sim = math.nan
    while attempts < n_max:
        want = min(batch, n_max - attempts)
        candidates = fetch(want)
        if not candidates:
            raise CandidateEmpty("generator produced no candidates")
        for cand in candidates:
            attempts += 1
            sim = score(cand)
            last_text, last_sim = cand, sim
            if interval.contains(sim):
                return cand, attempts, sim
            if attempts >= n_max:
                break
    if last_text is None:
        raise CandidateEmpty("no usable candidate after cleanup")
    return last_text, attempts, last_sim


def _first_sentence(text: str) -> str | None:
    """First complete sentence of a generator continuation, or None."""
    return first_complete_sentence(text)


def generate_next_sentence(
    config: GeneratorConfig,
    context: SentenceSequence,
    generator: Generator,
    embedder: Embedder,
) -> tuple[Sentence, SentenceTraceEntry]:
    """Sample the next watermark-valid sentence given the accepted context."""
    if not context.sentences:
        raise InvalidRequest("context must hold at least one sentence")
    if config.use_pca:
        config.pca.check_provenance(embedder.model_id, embedder.instruction)

    context_text = context.to_text()
    anchor_text = context.sentences[-1].text

    def embed_one(text: str) -> np.ndarray:
        try:
            vec = embedder.embed([text])[0]
        except RemoteUnavailable as exc:
            raise EmbedderUnavailable(str(exc)) from exc
        if config.use_pca:
            vec = pca_transform(config.pca, vec)
        return vec

    anchor_vec = embed_one(anchor_text)

    def fetch(n: int) -> list[str]:
        completions = generator.complete(context_text, config.sampling, n)
        sentences = [_first_sentence(c) for c in completions]
        return [s for s in sentences if s is not None]

    def score(candidate: str) -> float:
        return simmetrics.similarity(config.measure, anchor_vec, embed_one(candidate))

    start = time.monotonic()
    text, attempts, sim = rejection_sample(
        fetch, score, config.interval, config.n_max, config.batch_candidates
    )
    wall_ms = int((time.monotonic() - start) * 1000)

    span_start = len(context_text) + 1
    sentence = Sentence(
        index=len(context.sentences),
        text=text,
        char_span=(span_start, span_start + len(text)),
    )
    entry = SentenceTraceEntry(
        attempts=attempts,
        final_similarity=float(sim),
        accepted_in_interval=config.interval.contains(sim),
        wall_ms=wall_ms,
    )
    return sentence, entry


def generate_document(
    config: GeneratorConfig,
    prompt: str,
    n_sentences: int,
    generator: Generator,
    embedder: Embedder,
) -> GenerationTrace:
    """Generate ``n_sentences`` watermarked sentences continuing ``prompt``.

    The prompt is segmented and its last sentence seeds the similarity chain;
    every accepted sentence becomes the anchor for the next.
    """
    if n_sentences < 1:
        raise InvalidRequest(f"n_sentences must be >= 1, got {n_sentences}")
    context = split_sentences(prompt, prompt_len=0)
    context.prompt_len = len(context.sentences)

    accepted: list[Sentence] = []
    entries: list[SentenceTraceEntry] = []
    for _ in range(n_sentences):
        sentence, entry = generate_next_sentence(config, context, generator, embedder)
        context.sentences.append(sentence)
        accepted.append(sentence)
        entries.append(entry)
    return GenerationTrace(prompt_text=prompt, sentences=accepted, entries=entries)
