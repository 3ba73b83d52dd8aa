"""Detector calibration against a human-written corpus.

p0 (the expected fraction of valid sentences in human text) is the mass of
the human consecutive-similarity distribution inside the acceptance interval,
estimated from a 1000-bin histogram with pro-rata handling of the two edge
bins. The decision threshold beta is the smallest point on a [-10, 10] grid
of step 0.001 whose empirical false-positive rate on the human z-scores does
not exceed the target. Interval exploration reports, for every candidate
placement, the human mass (detectability) and the expected rejection-sampling
cost (efficiency), ranked low-p0-first among candidates within budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InsufficientSamples, NoOverlap, TargetUnreachable, ValidationError
from .jsonutil import read_json, write_json_exact
from .simmetrics import Interval

N_BINS = 1000
P0_CLAMP = 1e-6

BETA_GRID_LO = -10.0
BETA_GRID_HI = 10.0
BETA_GRID_STEP = 0.001


@dataclass
class SimilarityHistogram:
    bin_edges: np.ndarray  # 1001 strictly increasing edges
    counts: np.ndarray  # 1000 non-negative ints
    total: int
    range: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges,
            "counts": self.counts.astype(int).tolist(),
            "total": self.total,
            "range": [self.range[0], self.range[1]],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "SimilarityHistogram":
        return cls(
            bin_edges=np.asarray(rec["bin_edges"], dtype=np.float64),
            counts=np.asarray(rec["counts"], dtype=np.int64),
            total=int(rec["total"]),
            range=(float(rec["range"][0]), float(rec["range"][1])),
        )


def build_histogram(
    similarities: np.ndarray, value_range: tuple[float, float]
) -> SimilarityHistogram:
    """1000 equal-width bins over ``value_range``; out-of-range samples land
    in the nearest edge bin so no mass is lost."""
    sims = np.asarray(similarities, dtype=np.float64).ravel()
    if sims.size < 100:
        raise InsufficientSamples(f"need >= 100 similarity samples, got {sims.size}")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise ValidationError(f"histogram range requires lo < hi, got ({lo}, {hi})")
    clipped = np.clip(sims, lo, hi)
    counts, edges = np.histogram(clipped, bins=N_BINS, range=(lo, hi))
    return SimilarityHistogram(
        bin_edges=edges, counts=counts.astype(np.int64), total=int(sims.size),
        range=(lo, hi),
    )


def default_range(measure: str, similarities: np.ndarray | None = None) -> tuple[float, float]:
    """Histogram range defaults: cosine (-1, 1); euclidean (0, 1.1 * max seen)."""
    if measure == "cosine":
        return (-1.0, 1.0)
    if similarities is None or len(similarities) == 0:
        return (0.0, 2.0)
    return (0.0, 1.1 * float(np.max(similarities)))


def estimate_p0(hist: SimilarityHistogram, interval: Interval) -> float:
    """Histogram mass inside the interval, edge bins pro-rata, clamped to
    [1e-6, 1 - 1e-6] so the z statistic stays finite."""
    lo, hi = hist.range
    if interval.b <= lo or interval.a >= hi:
        raise NoOverlap(
            f"interval [{interval.a}, {interval.b}] lies outside histogram range ({lo}, {hi})"
        )
    if hist.total <= 0:
        raise InsufficientSamples("histogram holds no samples")
    left_edges = hist.bin_edges[:-1]
    right_edges = hist.bin_edges[1:]
    widths = right_edges - left_edges
    overlap = np.clip(
        np.minimum(right_edges, interval.b) - np.maximum(left_edges, interval.a),
        0.0, None,
    )
    mass = float(np.sum(hist.counts * (overlap / widths))) / hist.total
    return float(np.clip(mass, P0_CLAMP, 1.0 - P0_CLAMP))


def compute_beta(human_z_scores: np.ndarray, fp_target: float) -> float:
    """Smallest grid threshold with fraction(z > beta) <= fp_target.

    Strict inequality: a text is flagged only when its z-score exceeds beta,
    so scores equal to beta never count as false positives.
    """
    if not 0.0 < fp_target < 1.0:
        raise ValidationError(f"fp_target must lie in (0, 1), got {fp_target}")
    scores = np.sort(np.asarray(human_z_scores, dtype=np.float64).ravel())
    if scores.size < 100:
        raise InsufficientSamples(f"need >= 100 z-scores, got {scores.size}")
    j0 = round(BETA_GRID_LO / BETA_GRID_STEP)
    n_grid = round((BETA_GRID_HI - BETA_GRID_LO) / BETA_GRID_STEP) + 1
    idx = kernels.beta_sweep_index(scores, j0, n_grid, BETA_GRID_STEP, fp_target)
    if idx < 0:
        frac = float(np.mean(scores > BETA_GRID_HI))
        raise TargetUnreachable(
            f"even beta={BETA_GRID_HI} leaves FP rate {frac:.4f} > {fp_target}"
        )
    return (j0 + idx) * BETA_GRID_STEP


@dataclass
class IntervalCandidate:
    interval: Interval
    p0: float
    expected_samples: float


def explore_intervals(
    human_hist: SimilarityHistogram,
    candidate_widths: list[float],
    acceptance_hist: SimilarityHistogram | None = None,
    budget: float = 25.0,
    stride_bins: int = 5,
) -> list[IntervalCandidate]:
    """Enumerate interval placements and rank them for watermark use.

    For each width, intervals slide across the histogram range on a grid of
    ``stride_bins`` bins. p0 comes from the human histogram; the expected
    rejection-sampling cost is 1/p_acc, where p_acc is the interval mass of
    ``acceptance_hist`` (the generating model's similarity distribution) when
    given, else p0 as a proxy. Ranking: candidates whose expected cost fits
    the budget first, by ascending p0 (rarer in human text is better), then
    the over-budget rest by ascending cost.
    """
    lo, hi = human_hist.range
    bin_width = (hi - lo) / N_BINS
    out: list[IntervalCandidate] = []
    for width in candidate_widths:
        if width <= 0 or width >= hi - lo:
            continue
        start = lo
        while start + width <= hi + 1e-12:
            interval = Interval(start, start + width)
            p0 = estimate_p0(human_hist, interval)
            if acceptance_hist is not None:
                p_acc = estimate_p0(acceptance_hist, interval)
            else:
                p_acc = p0
            out.append(IntervalCandidate(interval, p0, 1.0 / p_acc))
            start += stride_bins * bin_width
    out.sort(key=lambda c: (c.expected_samples > budget, c.p0, c.expected_samples))
    return out


@dataclass
class CalibrationModel:
    histogram: SimilarityHistogram
    p0: float
    beta_table: dict[str, float]
    corpus_id: str = ""
    embedder_model_id: str = ""
    measure: str = "cosine"
    use_pca: bool = False
    interval: Interval | None = None

    def beta_for(self, fp_target: float) -> float:
        key = format(fp_target, "g")
        if key not in self.beta_table:
            raise ValidationError(
                f"no beta calibrated for FP target {fp_target}; have {sorted(self.beta_table)}"
            )
        return self.beta_table[key]

    def to_dict(self) -> dict:
        return {
            "histogram": self.histogram.to_dict(),
            "p0": self.p0,
            "beta_table": self.beta_table,
            "corpus_id": self.corpus_id,
            "embedder_model_id": self.embedder_model_id,
            "measure": self.measure,
            "use_pca": self.use_pca,
            "interval": list(self.interval.as_tuple()) if self.interval else None,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "CalibrationModel":
        interval = rec.get("interval")
        return cls(
            histogram=SimilarityHistogram.from_dict(rec["histogram"]),
            p0=float(rec["p0"]),
            beta_table={k: float(v) for k, v in rec["beta_table"].items()},
            corpus_id=rec.get("corpus_id", ""),
            embedder_model_id=rec.get("embedder_model_id", ""),
            measure=rec.get("measure", "cosine"),
            use_pca=bool(rec.get("use_pca", False)),
            interval=Interval(interval[0], interval[1]) if interval else None,
        )

    def save(self, path: str) -> None:
        write_json_exact(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "CalibrationModel":
        return cls.from_dict(read_json(path))
