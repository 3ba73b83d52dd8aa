"""Deterministic rule-based sentence segmentation.

Sentences end at a terminal mark (. ! ?), a newline, or end-of-text. A period
does not terminate after a known abbreviation (versioned list shipped as
package data) or after a single uppercase initial, and no mark terminates
unless followed by whitespace (which keeps decimals like 3.14 and tokens like
file.txt intact). Closing quotes/brackets directly after a terminal mark stay
with the sentence. Fragments shorter than 2 characters are merged into the
following sentence to avoid degenerate embeddings.

The first ``prompt_len`` sentences of a sequence are the prompt: they are
excluded from detection counts but the last of them anchors the first
similarity pair.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

from .errors import EmptyText, TooShort

_TERMINALS = ".!?"
_CLOSERS = "\"')]}’”"
_QUOTE_OPENERS = "\"'([{‘“"
_TOKEN_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.&'-")


@dataclass(frozen=True)
class Sentence:
    """One sentence with its [start, end) character span in the source text."""

    index: int
    text: str
    char_span: tuple[int, int]


@dataclass
class SentenceSequence:
    """Ordered sentences of a document; the leading ``prompt_len`` are prompt."""

    sentences: list[Sentence] = field(default_factory=list)
    prompt_len: int = 1

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]

    def to_text(self) -> str:
        """Canonical single-space reconstruction of the document."""
        return " ".join(s.text for s in self.sentences)

    def pair_count(self) -> int:
        """Number of counted similarity pairs (post-prompt sentences)."""
        return max(0, len(self.sentences) - max(1, self.prompt_len))

    @classmethod
    def from_texts(cls, texts: list[str], prompt_len: int = 1) -> "SentenceSequence":
        """Build a sequence from bare sentence strings (spans in the canonical join)."""
        sentences = []
        offset = 0
        for i, text in enumerate(texts):
            sentences.append(Sentence(index=i, text=text, char_span=(offset, offset + len(text))))
            offset += len(text) + 1
        return cls(sentences=sentences, prompt_len=prompt_len)


def _load_abbreviations() -> tuple[frozenset, frozenset]:
    """Returns (case-insensitive entries, exact-match entries)."""
    raw = importlib.resources.files("simmark.data").joinpath("abbreviations.txt")
    ci, exact = set(), set()
    for line in raw.read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        if entry.lower() == entry:
            ci.add(entry)
        else:
            exact.add(entry)
    return frozenset(ci), frozenset(exact)


_ABBREV_CI, _ABBREV_EXACT = _load_abbreviations()


def _preceding_token(text: str, pos: int) -> str:
    """Token immediately before position ``pos`` (the terminal mark)."""
    start = pos
    while start > 0 and text[start - 1] in _TOKEN_CHARS:
        start -= 1
    return text[start:pos]


def _is_abbreviation(token: str) -> bool:
    if not token:
        return False
    if token in _ABBREV_EXACT:
        return True
    return token.lower() in _ABBREV_CI


def _boundary_after_mark(text: str, i: int) -> int | None:
    """If the terminal mark at ``i`` ends a sentence, return the boundary index
    (position just past the sentence, closers included); else None."""
    j = i
    while j + 1 < len(text) and text[j + 1] in _TERMINALS:
        j += 1
    run = text[i : j + 1]
    while j + 1 < len(text) and text[j + 1] in _CLOSERS:
        j += 1
    if j + 1 < len(text) and not text[j + 1].isspace():
        return None  # mid-token mark: decimals, file.txt, e.g.x
    if run == ".":
        token = _preceding_token(text, i)
        if _is_abbreviation(token):
            return None
    elif set(run) == {"."}:
        # ellipsis: only break when what follows clearly starts a sentence
        k = j + 1
        while k < len(text) and text[k].isspace():
            k += 1
        if k < len(text):
            nxt = text[k]
            if not (nxt.isupper() or nxt.isdigit() or nxt in _QUOTE_OPENERS):
                return None
    return j + 1


def _raw_chunks(text: str) -> list[tuple[int, int]]:
    """Split into raw [start, end) chunks at sentence boundaries and newlines."""
    chunks = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            chunks.append((start, i))
            start = i + 1
            i += 1
            continue
        if c in _TERMINALS:
            end = _boundary_after_mark(text, i)
            if end is not None:
                chunks.append((start, end))
                start = end
                i = end
                continue
        i += 1
    if start < n:
        chunks.append((start, n))
    return chunks


def _trim_span(text: str, start: int, end: int) -> tuple[int, int] | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start >= end:
        return None
    return (start, end)


def split_sentences(text: str, prompt_len: int = 1) -> SentenceSequence:
    """Segment ``text`` into sentences with exact source spans.

    Deterministic: identical input bytes always yield identical segmentation.
    Raises EmptyText for empty or whitespace-only input.
    """
    if not isinstance(text, str):
        raise EmptyText("text must be a string")
    if not text.strip():
        raise EmptyText("cannot segment empty or whitespace-only text")

    spans = []
    for raw_start, raw_end in _raw_chunks(text):
        trimmed = _trim_span(text, raw_start, raw_end)
        if trimmed is not None:
            spans.append(trimmed)

    # merge fragments shorter than 2 chars into the following sentence
    merged: list[tuple[int, int]] = []
    pending_start: int | None = None
    for start, end in spans:
        if pending_start is not None:
            start = pending_start
            pending_start = None
        if end - start < 2:
            pending_start = start
            continue
        merged.append((start, end))
    if pending_start is not None:
        if merged:
            last_start, _ = merged[-1]
            # re-trim: the trailing fragment extends the final sentence
            merged[-1] = _trim_span(text, last_start, spans[-1][1]) or merged[-1]
        else:
            merged.append(_trim_span(text, pending_start, spans[-1][1]) or spans[-1])

    sentences = [
        Sentence(index=i, text=text[start:end], char_span=(start, end))
        for i, (start, end) in enumerate(merged)
    ]
    return SentenceSequence(sentences=sentences, prompt_len=prompt_len)


def first_complete_sentence(text: str) -> str | None:
    """First terminal-ended (or newline-bounded) sentence of a continuation.

    Used to extract one candidate sentence from a generator's token stream:
    trailing fragments are discarded rather than merged, and degenerate scraps
    shorter than 2 characters are skipped. Returns None when the continuation
    holds no complete sentence.
    """
    if not isinstance(text, str) or not text.strip():
        return None
    for raw_start, raw_end in _raw_chunks(text):
        trimmed = _trim_span(text, raw_start, raw_end)
        if trimmed is None:
            continue
        start, end = trimmed
        if end - start < 2:
            continue
        chunk = text[start:end]
        tail = chunk.rstrip(_CLOSERS)
        if tail and tail[-1] in _TERMINALS:
            return chunk
        if raw_end < len(text) and text[raw_end] == "\n":
            return chunk
    return None


def consecutive_pairs(seq: SentenceSequence) -> list[tuple[Sentence, Sentence]]:
    """All adjacent (anchor, target) sentence pairs; the prompt anchors only."""
    if len(seq.sentences) < 2:
        raise TooShort(f"need at least 2 sentences, got {len(seq.sentences)}")
    return list(zip(seq.sentences[:-1], seq.sentences[1:]))


def detection_pairs(seq: SentenceSequence) -> list[tuple[Sentence, Sentence]]:
    """The pairs whose targets are counted at detection time.

    The last prompt sentence serves as the first anchor; every post-prompt
    sentence is the target of exactly one pair.
    """
    first_anchor = max(1, seq.prompt_len) - 1
    pairs = consecutive_pairs(seq)
    return pairs[first_anchor:]
