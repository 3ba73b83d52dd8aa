"""Adversarial transformations for robustness evaluation.

Four attack families: sentence-by-sentence paraphrase through a remote
paraphraser, the bigram variant that requests many paraphrases and keeps the
most watermark-disrupting one, random sentence dropping, and sentence merging
(terminal punctuation replaced by " and"). Drop and merge are seeded and
fully deterministic; paraphrase attacks are deterministic whenever the
paraphraser is.
"""

from __future__ import annotations

import difflib
import os
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import requests

from . import simmetrics
from .detection import DetectorConfig
from .embedding import Embedder
from .errors import (
    AllDropped,
    InvalidProbability,
    ParaphraserUnavailable,
    ValidationError,
)
from .projection import pca_transform
from .segmentation import SentenceSequence, split_sentences

ATTACK_KINDS = ("paraphrase", "bigram", "drop", "merge", "composed")
BIGRAM_OBJECTIVES = ("soft", "hard", "edit")

# Mirrors the prompt shape used to steer LLM paraphrasers: preceding context
# first, then the sentence to rewrite.
DEFAULT_PROMPT_TEMPLATE = (
    "Previous context: {context}\nCurrent sentence to paraphrase: {sent}"
)
DEFAULT_BIGRAM_TEMPLATE = (
    "Previous context: {context}\n"
    "Paraphrase in {n} different ways and return a numbered list: {sent}"
)

_TERMINALS = ".!?"


@dataclass
class AttackSpec:
    kind: str
    paraphraser_endpoint: str = ""
    n_candidates: int = 10
    p: float = 0.0
    rng_seed: int = 0
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    objective: str = "soft"  # bigram candidate selection rule
    stages: list["AttackSpec"] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValidationError(f"attack kind must be one of {ATTACK_KINDS}, got {self.kind!r}")
        if self.kind == "bigram" and self.n_candidates < 2:
            raise ValidationError("bigram attack requires n_candidates >= 2")
        if self.kind == "bigram" and self.objective not in BIGRAM_OBJECTIVES:
            raise ValidationError(f"bigram objective must be one of {BIGRAM_OBJECTIVES}")
        if self.kind == "composed" and not self.stages:
            raise ValidationError("composed attack requires stages")


class Paraphraser(Protocol):
    def paraphrase(self, sentence: str, context: str, n: int, prompt: str) -> list[str]: ...


class HttpParaphraser:
    """Client for ``POST {endpoint}/v1/paraphrase`` with retry/backoff."""

    def __init__(self, endpoint: str, timeout_ms: int = 60000, max_retries: int = 3,
                 backoff_base_s: float = 0.25, session: requests.Session | None = None):
        if not endpoint:
            raise ValidationError("paraphraser endpoint must not be empty")
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        self.max_retries = max_retries
        self._backoff_base_s = backoff_base_s
        self._session = session or requests.Session()

    def paraphrase(self, sentence: str, context: str, n: int, prompt: str) -> list[str]:
        url = self.endpoint.rstrip("/") + "/v1/paraphrase"
        payload = {"sentence": sentence, "context": context, "n": n, "prompt": prompt}
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
            candidates = resp.json().get("candidates")
            if not isinstance(candidates, list):
                last_err = "malformed response body"
                continue
            return [str(c) for c in candidates]
        raise ParaphraserUnavailable(
            f"paraphraser at {url} failed after {self.max_retries + 1} attempts: {last_err}"
        )


@dataclass
class AttackResult:
    sequence: SentenceSequence
    fallback_indices: list[int] = field(default_factory=list)


def _protected_prefix(seq: SentenceSequence) -> int:
    return max(1, seq.prompt_len)


def paraphrase_document(
    spec: AttackSpec, seq: SentenceSequence, paraphraser: Paraphraser
) -> AttackResult:
    """Replace every non-prompt sentence with a paraphrase, chaining context.

    The context injected into the prompt template is the already-paraphrased
    prefix. An empty paraphrase falls back to the original sentence, with the
    sentence index recorded so evaluation can exclude fallbacks.
    """
    keep = _protected_prefix(seq)
    out_texts = [s.text for s in seq.sentences[:keep]]
    fallbacks: list[int] = []
    for sentence in seq.sentences[keep:]:
        context = " ".join(out_texts)
        prompt = spec.prompt_template.format(context=context, sent=sentence.text)
        candidates = paraphraser.paraphrase(sentence.text, context, 1, prompt)
        replacement = candidates[0].strip() if candidates else ""
        if not replacement:
            replacement = sentence.text
            fallbacks.append(sentence.index)
        out_texts.append(replacement)
    return AttackResult(
        sequence=SentenceSequence.from_texts(out_texts, prompt_len=seq.prompt_len),
        fallback_indices=fallbacks,
    )


def _candidate_scores(
    objective: str,
    original: str,
    candidates: list[str],
    anchor_vec: np.ndarray | None,
    detector: DetectorConfig,
    embedder: Embedder,
) -> np.ndarray:
    if objective == "edit":
        # weaker black-box adversary: most-dissimilar wording wins
        return np.array([
            difflib.SequenceMatcher(None, original, c).ratio() for c in candidates
        ])
    vecs = embedder.embed(candidates)
    if detector.use_pca:
        vecs = pca_transform(detector.pca, vecs)
    sims = np.array([
        simmetrics.similarity(detector.measure, anchor_vec, v) for v in vecs
    ])
    if objective == "hard":
        return simmetrics.hard_counts(sims, detector.interval)
    # minimizing the per-step soft count also minimizes the running z-score,
    # so a separate "running z" objective would select identically
    return simmetrics.soft_counts(sims, detector.interval, detector.decay)


def bigram_attack(
    spec: AttackSpec,
    seq: SentenceSequence,
    detector: DetectorConfig,
    paraphraser: Paraphraser,
    embedder: Embedder,
) -> AttackResult:
    """Strongest-adversary paraphrase: among ``n_candidates`` rewrites of each
    sentence, keep the one minimizing the detector's soft count against the
    previously selected sentence (ties break to the lowest candidate index)."""
    if spec.n_candidates < 2:
        raise ValidationError("bigram attack requires n_candidates >= 2")
    keep = _protected_prefix(seq)
    out_texts = [s.text for s in seq.sentences[:keep]]
    fallbacks: list[int] = []
    template = (
        spec.prompt_template
        if spec.prompt_template != DEFAULT_PROMPT_TEMPLATE
        else DEFAULT_BIGRAM_TEMPLATE
    )
    for sentence in seq.sentences[keep:]:
        context = " ".join(out_texts)
        prompt = template.format(context=context, sent=sentence.text, n=spec.n_candidates)
        candidates = paraphraser.paraphrase(sentence.text, context, spec.n_candidates, prompt)
        candidates = [c.strip() for c in candidates if c and c.strip()]
        if not candidates:
            out_texts.append(sentence.text)
            fallbacks.append(sentence.index)
            continue
        anchor_vec = None
        if spec.objective != "edit":
            anchor_vec = embedder.embed([out_texts[-1]])[0]
            if detector.use_pca:
                anchor_vec = pca_transform(detector.pca, anchor_vec)
        scores = _candidate_scores(
            spec.objective, sentence.text, candidates, anchor_vec, detector, embedder
        )
        out_texts.append(candidates[int(np.argmin(scores))])
    return AttackResult(
        sequence=SentenceSequence.from_texts(out_texts, prompt_len=seq.prompt_len),
        fallback_indices=fallbacks,
    )


def drop_attack(spec: AttackSpec, seq: SentenceSequence) -> SentenceSequence:
    """Remove each non-prompt sentence independently with probability p."""
    p = spec.p
    if not 0.0 <= p < 1.0:
        raise InvalidProbability(f"drop probability must lie in [0, 1), got {p}")
    keep = _protected_prefix(seq)
    body = seq.sentences[keep:]
    rng = np.random.default_rng(spec.rng_seed)
    retained = [s for s, u in zip(body, rng.random(len(body))) if u >= p]
    if body and not retained:
        retained = [s for s, u in zip(body, rng.random(len(body))) if u >= p]
        if not retained:
            raise AllDropped("every non-prompt sentence was dropped twice in a row")
    texts = [s.text for s in seq.sentences[:keep]] + [s.text for s in retained]
    return SentenceSequence.from_texts(texts, prompt_len=seq.prompt_len)


def merge_attack(spec: AttackSpec, text: str) -> str:
    """Replace sentence-final terminal marks with " and" at probability p.

    Only marks that both end a sentence and are followed by another sentence
    are candidates; the following sentence's leading capital is lowered. The
    upper bound p < 1/2 keeps the attacked text from collapsing into
    unnaturally long run-on sentences.
    """
    p = spec.p
    if not 0.0 <= p < 0.5:
        raise InvalidProbability(f"merge probability must lie in [0, 0.5), got {p}")
    seq = split_sentences(text)
    boundaries = []
    for cur, nxt in zip(seq.sentences[:-1], seq.sentences[1:]):
        if cur.text and cur.text[-1] in _TERMINALS:
            boundaries.append((cur.char_span[1] - 1, nxt.char_span[0]))
    rng = np.random.default_rng(spec.rng_seed)
    draws = rng.random(len(boundaries))
    chars = list(text)
    for (mark_pos, next_start), u in sorted(zip(boundaries, draws), reverse=True):
        if u >= p:
            continue
        if chars[next_start].isupper():
            chars[next_start] = chars[next_start].lower()
        chars[mark_pos : mark_pos + 1] = list(" and")
    return "".join(chars)


def apply_attack(
    spec: AttackSpec,
    seq: SentenceSequence,
    detector: DetectorConfig | None = None,
    paraphraser: Paraphraser | None = None,
    embedder: Embedder | None = None,
) -> SentenceSequence:
    """Dispatch one attack (or a composed chain) over a sentence sequence."""
    if spec.kind == "drop":
        return drop_attack(spec, seq)
    if spec.kind == "merge":
        merged = merge_attack(spec, seq.to_text())
        return split_sentences(merged, prompt_len=seq.prompt_len)
    if spec.kind == "paraphrase":
        if paraphraser is None:
            raise ValidationError("paraphrase attack requires a paraphraser")
        return paraphrase_document(spec, seq, paraphraser).sequence
    if spec.kind == "bigram":
        if paraphraser is None or detector is None or embedder is None:
            raise ValidationError("bigram attack requires paraphraser, detector and embedder")
        return bigram_attack(spec, seq, detector, paraphraser, embedder).sequence
    out = seq
    for stage in spec.stages:
        out = apply_attack(stage, out, detector, paraphraser, embedder)
    return out
