"""Watermark detection: segment, embed, soft-count, one-proportion z-test.

The test statistic is the normalized deviation of the soft count of valid
sentences from its expectation under human text:

    z = (N_valid_soft - p0 * N) / sqrt(p0 * (1 - p0) * N)

where N is the number of consecutive-pair similarities (the prompt sentence
anchors the first pair but is never counted) and p0 is the calibrated
fraction of valid sentences in human writing. Verdict is *watermarked* when
z exceeds the calibrated threshold beta, *human* otherwise, *inconclusive*
when the text has fewer than ``min_sentences`` counted sentences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import simmetrics
from .embedding import Embedder
from .errors import EmptyText, InvalidP0, ValidationError
from .projection import PcaModel, pca_transform
from .segmentation import SentenceSequence, split_sentences
from .simmetrics import Interval

VERDICT_WATERMARKED = "watermarked"
VERDICT_HUMAN = "human"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass
class DetectorConfig:
    interval: Interval
    p0: float
    beta: float
    measure: str = simmetrics.COSINE
    use_pca: bool = False
    pca: PcaModel | None = None
    decay: float = simmetrics.DEFAULT_DECAY  # math.inf selects hard counting
    min_sentences: int = 8

    def __post_init__(self):
        simmetrics.validate_measure(self.measure)
        simmetrics.validate_decay(self.decay)
        if not 0.0 < self.p0 < 1.0:
            raise InvalidP0(f"p0 must lie in (0, 1), got {self.p0}")
        if self.use_pca and self.pca is None:
            raise ValidationError("use_pca=True requires a fitted PCA model")
        if self.min_sentences < 1:
            raise ValidationError("min_sentences must be >= 1")


@dataclass
class DetectionReport:
    n: int
    similarities: list[float]
    soft_counts: list[float]
    n_valid_soft: float
    p0: float
    z_soft: float
    beta: float
    verdict: str
    doc_id: str | None = None

    def to_dict(self) -> dict:
        rec = {
            "N": self.n,
            "similarities": self.similarities,
            "soft_counts": self.soft_counts,
            "N_valid_soft": self.n_valid_soft,
            "p0": self.p0,
            "z_soft": self.z_soft,
            "beta": self.beta,
            "verdict": self.verdict,
        }
        if self.doc_id is not None:
            rec["id"] = self.doc_id
        return rec

    @classmethod
    def from_dict(cls, rec: dict) -> "DetectionReport":
        return cls(
            n=int(rec["N"]),
            similarities=[float(x) for x in rec["similarities"]],
            soft_counts=[float(x) for x in rec["soft_counts"]],
            n_valid_soft=float(rec["N_valid_soft"]),
            p0=float(rec["p0"]),
            z_soft=float(rec["z_soft"]),
            beta=float(rec["beta"]),
            verdict=rec["verdict"],
            doc_id=rec.get("id"),
        )


def z_soft(n_valid_soft: float, p0: float, n: int) -> float:
    """One-proportion z statistic on the soft count of valid sentences."""
    if not 0.0 < p0 < 1.0:
        raise InvalidP0(f"p0 must lie in (0, 1), got {p0}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return (n_valid_soft - p0 * n) / math.sqrt(p0 * (1.0 - p0) * n)


def detect_from_similarities(
    config: DetectorConfig, similarities: np.ndarray, doc_id: str | None = None
) -> DetectionReport:
    """Score a document given its consecutive-pair similarities."""
    sims = np.asarray(similarities, dtype=np.float64)
    n = int(sims.size)
    if n == 0:
        return DetectionReport(
            n=0, similarities=[], soft_counts=[], n_valid_soft=0.0,
            p0=config.p0, z_soft=0.0, beta=config.beta,
            verdict=VERDICT_INCONCLUSIVE, doc_id=doc_id,
        )
    counts = simmetrics.soft_counts(sims, config.interval, config.decay)
    n_valid = float(counts.sum())
    z = z_soft(n_valid, config.p0, n)
    if n < config.min_sentences:
        verdict = VERDICT_INCONCLUSIVE
    elif z > config.beta:
        verdict = VERDICT_WATERMARKED
    else:
        verdict = VERDICT_HUMAN
    return DetectionReport(
        n=n,
        similarities=[float(s) for s in sims],
        soft_counts=[float(c) for c in counts],
        n_valid_soft=n_valid,
        p0=config.p0,
        z_soft=float(z),
        beta=config.beta,
        verdict=verdict,
        doc_id=doc_id,
    )


def document_similarities(
    config: DetectorConfig, seq: SentenceSequence, embedder: Embedder
) -> np.ndarray:
    """Consecutive-pair similarities of a segmented document."""
    if len(seq) < 2:
        return np.empty(0, dtype=np.float64)
    emb = embedder.embed(seq.texts())
    if config.use_pca:
        config.pca.check_provenance(embedder.model_id, embedder.instruction)
        emb = pca_transform(config.pca, emb)
    sims = simmetrics.pairwise_similarities(config.measure, emb)
    first_anchor = max(1, seq.prompt_len) - 1
    return sims[first_anchor:]


def detect(
    config: DetectorConfig, text: str, embedder: Embedder, doc_id: str | None = None
) -> DetectionReport:
    """Run the full detection pipeline on raw text.

    Texts too short for a confident call (fewer than ``min_sentences``
    counted sentences, including empty input) come back with verdict
    *inconclusive* rather than an error; embedder failures propagate.
    """
    try:
        seq = split_sentences(text)
    except EmptyText:
        return detect_from_similarities(config, np.empty(0), doc_id=doc_id)
    sims = document_similarities(config, seq, embedder)
    return detect_from_similarities(config, sims, doc_id=doc_id)
