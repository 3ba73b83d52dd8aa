"""Sentence embedders behind one pluggable interface.

Two implementations: a remote HTTP embedder speaking the
``POST {endpoint}/v1/embed`` protocol, and a deterministic synthetic embedder
(seeded hash expanded to a unit Gaussian vector) so the whole pipeline runs
with no network or model weights. Vectors are float64 numpy arrays; results
are cached content-addressed by (text digest, instruction, model_id) with
atomic get-or-insert and in-flight de-duplication across threads.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, EmptyInput, RemoteUnavailable, ValidationError
from .jsonutil import dumps_exact, loads

EMBED_KINDS = ("remote", "synthetic")


@dataclass
class EmbedderSpec:
    """Declarative description of an embedder, as it appears in config files."""

    kind: str
    model_id: str
    instruction: str
    dim: int
    endpoint: str = ""
    timeout_ms: int = 30000
    max_retries: int = 3
    seed: int = 0
    batch_size: int = 32
    cache_path: str | None = None

    def __post_init__(self):
        if self.kind not in EMBED_KINDS:
            raise ValidationError(f"embedder kind must be one of {EMBED_KINDS}, got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValidationError("remote embedder requires an endpoint")
        if self.dim < 1:
            raise ValidationError("embedding dim must be >= 1")


class Embedder(Protocol):
    model_id: str
    instruction: str
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def _validate_texts(texts: Sequence[str]) -> list[str]:
    texts = list(texts)
    if not texts:
        raise EmptyInput("no texts to embed")
    for t in texts:
        if not isinstance(t, str) or not t:
            raise EmptyInput("every text must be a non-empty string")
    return texts


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cache_key(text: str, instruction: str, model_id: str) -> tuple[str, str, str]:
    """Content-addressed key: paraphrased variants never collide."""
    return (text_digest(text), instruction, model_id)


# ---------------------------------------------------------------------------
# synthetic embedder
# ---------------------------------------------------------------------------

def synthetic_embed(seed: int, text: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-embedding: seeded hash -> Gaussian draw -> unit norm."""
    if dim < 2:
        raise ValidationError(f"synthetic embedding dim must be >= 2, got {dim}")
    digest = hashlib.blake2b(
        text.encode("utf-8"), digest_size=16, key=str(seed).encode("utf-8")
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    v = rng.standard_normal(dim)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:  # unreachable for any practical draw; keeps the contract total
        v[0] = 1.0
        norm = 1.0
    return v / norm


class SyntheticEmbedder:
    """Test and simulation double; no network, fully reproducible."""

    def __init__(self, seed: int = 0, dim: int = 16, instruction: str = "",
                 model_id: str | None = None):
        self.seed = seed
        self.dim = dim
        self.instruction = instruction
        self.model_id = model_id or f"synthetic-{dim}-seed{seed}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = _validate_texts(texts)
        # the instruction conditions the synthetic space just like a real
        # instruction-tuned embedder: different instruction, different vectors
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, t in enumerate(texts):
            out[i] = synthetic_embed(self.seed, self.instruction + "\x1f" + t, self.dim)
        return out


# ---------------------------------------------------------------------------
# remote embedder
# ---------------------------------------------------------------------------

class RemoteEmbedder:
    """Client for ``POST {endpoint}/v1/embed`` with retry and batching."""

    def __init__(self, spec: EmbedderSpec, session: requests.Session | None = None,
                 backoff_base_s: float = 0.25):
        if spec.kind != "remote":
            raise ValidationError("RemoteEmbedder requires a remote EmbedderSpec")
        self.spec = spec
        self.model_id = spec.model_id
        self.instruction = spec.instruction
        self.dim = spec.dim
        self._session = session or requests.Session()
        self._backoff_base_s = backoff_base_s

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = _validate_texts(texts)
        chunks = [
            texts[i : i + self.spec.batch_size]
            for i in range(0, len(texts), self.spec.batch_size)
        ]
        return np.vstack([self._embed_batch(chunk) for chunk in chunks])

    def _embed_batch(self, batch: list[str]) -> np.ndarray:
        url = self.spec.endpoint.rstrip("/") + "/v1/embed"
        payload = {"model": self.spec.model_id, "instruction": self.spec.instruction,
                   "texts": batch}
        headers = {}
        api_key = os.environ.get("SIMMARK_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        attempts = self.spec.max_retries + 1
        last_err = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self._backoff_base_s * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(
                    url, json=payload, headers=headers,
                    timeout=self.spec.timeout_ms / 1000.0,
                )
            except requests.RequestException as exc:
                last_err = str(exc)
                continue
            if resp.status_code // 100 != 2:
                last_err = f"HTTP {resp.status_code}"
                continue
            return self._parse(resp, len(batch))
        raise RemoteUnavailable(
            f"embedder at {url} failed after {attempts} attempts: {last_err}"
        )

    def _parse(self, resp, expected_n: int) -> np.ndarray:
        body = resp.json()
        vectors = body.get("vectors")
        if vectors is None or len(vectors) != expected_n:
            raise RemoteUnavailable("embedder returned a malformed response body")
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            got = arr.shape[1] if arr.ndim == 2 else "ragged"
            raise DimensionMismatch(f"expected dim {self.dim}, endpoint returned {got}")
        if not np.all(np.isfinite(arr)):
            raise RemoteUnavailable("embedder returned non-finite values")
        return arr


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------

class EmbeddingCache:
    """Thread-safe vector cache with optional append-only JSONL persistence.

    Vectors round-trip the file bit-exactly (17 significant digit floats).
    Concurrent requests for the same key compute once: the first caller owns
    the computation, later callers block on an in-flight event.
    """

    def __init__(self, path: str | None = None):
        self._path = path
        self._data: dict[tuple, np.ndarray] = {}
        self._pending: dict[tuple, threading.Event] = {}
        self._lock = threading.Lock()
        if path and os.path.exists(path):
            self._load(path)

    def __len__(self) -> int:
        return len(self._data)

    def _load(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = loads(line)
                key = (rec["digest"], rec["instruction"], rec["model_id"])
                vec = np.asarray(rec["values"], dtype=np.float64)
                vec.setflags(write=False)
                self._data[key] = vec

    def _persist(self, entries: list[tuple[tuple, np.ndarray]]) -> None:
        if not self._path:
            return
        lines = []
        for (digest, instruction, model_id), vec in entries:
            lines.append(dumps_exact({
                "digest": digest,
                "instruction": instruction,
                "model_id": model_id,
                "dim": int(vec.size),
                "values": vec,
            }))
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def get(self, key: tuple) -> np.ndarray | None:
        with self._lock:
            return self._data.get(key)

    def get_or_compute(self, keys: list[tuple], texts: list[str], compute_batch):
        """Resolve each key, computing misses via ``compute_batch`` exactly once."""
        order: dict[tuple, str] = {}
        for key, text in zip(keys, texts):
            order.setdefault(key, text)

        owned: list[tuple] = []
        waiting: list[tuple] = []
        with self._lock:
            for key in order:
                if key in self._data:
                    continue
                if key in self._pending:
                    waiting.append(key)
                else:
                    self._pending[key] = threading.Event()
                    owned.append(key)

        if owned:
            try:
                vecs = np.asarray(compute_batch([order[k] for k in owned]), dtype=np.float64)
            except BaseException:
                with self._lock:
                    for key in owned:
                        self._pending.pop(key).set()
                raise
            entries = []
            with self._lock:
                for key, vec in zip(owned, vecs):
                    vec = np.array(vec, dtype=np.float64)
                    vec.setflags(write=False)
                    self._data[key] = vec
                    entries.append((key, vec))
                    self._pending.pop(key).set()
                self._persist(entries)

        for key in waiting:
            event = None
            with self._lock:
                event = self._pending.get(key)
            if event is not None:
                event.wait()

        out = []
        retry: list[tuple] = []
        with self._lock:
            for key in keys:
                if key not in self._data:
                    retry.append(key)
        if retry:
            # the in-flight owner failed; recompute the stragglers ourselves
            uniq = list(dict.fromkeys(retry))
            vecs = np.asarray(compute_batch([order[k] for k in uniq]), dtype=np.float64)
            with self._lock:
                for key, vec in zip(uniq, vecs):
                    vec = np.array(vec, dtype=np.float64)
                    vec.setflags(write=False)
                    self._data[key] = vec
                self._persist([(k, self._data[k]) for k in uniq])
        with self._lock:
            for key in keys:
                out.append(self._data[key])
        return out


class CachedEmbedder:
    """Wraps any embedder with an :class:`EmbeddingCache`."""

    def __init__(self, inner: Embedder, cache: EmbeddingCache | None = None):
        self.inner = inner
        self.cache = cache if cache is not None else EmbeddingCache()
        self.model_id = inner.model_id
        self.instruction = inner.instruction
        self.dim = inner.dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = _validate_texts(texts)
        keys = [cache_key(t, self.instruction, self.model_id) for t in texts]
        vectors = self.cache.get_or_compute(keys, texts, self.inner.embed)
        return np.vstack([v[np.newaxis, :] for v in vectors])


def build_embedder(spec: EmbedderSpec, with_cache: bool = True) -> Embedder:
    """Construct the embedder described by ``spec`` (cache wrap optional)."""
    if spec.kind == "synthetic":
        inner: Embedder = SyntheticEmbedder(
            seed=spec.seed, dim=spec.dim, instruction=spec.instruction,
            model_id=spec.model_id,
        )
    else:
        inner = RemoteEmbedder(spec)
    if not with_cache:
        return inner
    cache = EmbeddingCache(spec.cache_path)
    return CachedEmbedder(inner, cache)


def embed(spec: EmbedderSpec, texts: Sequence[str]) -> np.ndarray:
    """One-shot convenience: build the embedder from ``spec`` and embed."""
    return build_embedder(spec).embed(texts)
