"""Similarity measures and the soft interval-membership count.

The watermark signal lives in the similarity between consecutive sentence
embeddings. A sentence is *valid* when that similarity falls inside a
predefined closed interval [a, b]; the soft count relaxes the step function
with an exponential decay of rate K outside the interval so that values just
past a boundary still contribute partial evidence:

    c(s) = 1                                   if a <= s <= b
    c(s) = exp(-K * min(|a - s|, |b - s|))     otherwise

K -> inf recovers the hard step function (math.inf is accepted for exactly
that purpose). exp underflow clamps to 0 silently; that only affects
similarities hopelessly far from the interval.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ValidationError, ZeroVector

MEASURES = ("cosine", "euclidean")

COSINE = "cosine"
EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class Interval:
    """Closed acceptance interval [a, b] on the similarity axis."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValidationError("interval bounds must be finite")
        if not self.a < self.b:
            raise ValidationError(f"interval requires a < b, got [{self.a}, {self.b}]")

    def contains(self, s: float) -> bool:
        return self.a <= s <= self.b

    def as_tuple(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def width(self) -> float:
        return self.b - self.a


def validate_measure(measure: str) -> str:
    if measure not in MEASURES:
        raise ValidationError(f"unknown similarity measure {measure!r}; expected one of {MEASURES}")
    return measure


def validate_decay(k: float) -> float:
    """Decay factor must be positive; math.inf selects hard counting."""
    k = float(k)
    if math.isnan(k) or k <= 0:
        raise ValidationError(f"decay factor must be > 0, got {k}")
    return k


def similarity(measure: str, u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity or Euclidean distance between two vectors."""
    validate_measure(measure)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector dims differ: {u.shape} vs {v.shape}")
    if measure == COSINE:
        nu = math.sqrt(float(np.dot(u, u)))
        nv = math.sqrt(float(np.dot(v, v)))
        if nu == 0.0 or nv == 0.0:
            raise ZeroVector("cosine similarity is undefined for the zero vector")
        return float(np.dot(u, v)) / (nu * nv)
    diff = u - v
    return math.sqrt(float(np.dot(diff, diff)))


def pairwise_similarities(measure: str, embeddings: np.ndarray) -> np.ndarray:
    """Similarity between each consecutive pair of rows of ``embeddings``."""
    validate_measure(measure)
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < 2:
        raise DimensionMismatch("need a (n >= 2, d) embedding matrix")
    if measure == COSINE:
        norms = np.sqrt(np.einsum("ij,ij->i", embeddings, embeddings))
        if np.any(norms == 0.0):
            raise ZeroVector("cosine similarity is undefined for the zero vector")
        return kernels.consecutive_cosine(embeddings)
    return kernels.consecutive_euclidean(embeddings)


def soft_count(s: float, interval: Interval, k: float) -> float:
    """Soft membership of similarity ``s`` in ``interval`` with decay ``k``."""
    if not math.isfinite(s):
        raise ValidationError(f"similarity must be finite, got {s}")
    if interval.contains(s):
        return 1.0
    dist = min(abs(interval.a - s), abs(interval.b - s))
    try:
        return math.exp(-k * dist)
    except OverflowError:
        return 0.0


def hard_count(s: float, interval: Interval) -> float:
    """Step-function membership: 1 inside the closed interval, else 0."""
    if not math.isfinite(s):
        raise ValidationError(f"similarity must be finite, got {s}")
    return 1.0 if interval.contains(s) else 0.0


def soft_counts(similarities: np.ndarray, interval: Interval, k: float) -> np.ndarray:
    """Vectorized :func:`soft_count` over an array of similarities."""
    return kernels.soft_counts(similarities, interval.a, interval.b, k)


def hard_counts(similarities: np.ndarray, interval: Interval) -> np.ndarray:
    return kernels.hard_counts(similarities, interval.a, interval.b)


DEFAULT_DECAY = 250.0


def default_instruction(measure: str, use_pca: bool) -> str:
    """Embedder instruction string matching the similarity configuration."""
    if use_pca:
        return "Represent the sentence for PCA:"
    if measure == COSINE:
        return "Represent the sentence for cosine similarity:"
    return "Represent the sentence for Euclidean distance:"


def load_interval_presets() -> dict[str, dict]:
    """Named interval presets shipped as package data."""
    raw = importlib.resources.files("simmark.data").joinpath("interval_presets.json")
    return json.loads(raw.read_text(encoding="utf-8"))


def interval_preset(name: str) -> tuple[Interval, str, bool]:
    """Resolve a preset name to (interval, measure, use_pca)."""
    presets = load_interval_presets()
    if name not in presets:
        raise ValidationError(
            f"unknown interval preset {name!r}; available: {', '.join(sorted(presets))}"
        )
    entry = presets[name]
    return Interval(entry["a"], entry["b"]), entry["measure"], bool(entry["use_pca"])
