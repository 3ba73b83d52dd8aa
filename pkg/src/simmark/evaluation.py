"""Evaluation metrics and the desk-scale simulation study.

Metrics: rank-based ROC-AUC (ties count half), true-positive rate at a fixed
false-positive budget, and token-trigram Shannon entropy (base 2, whitespace
tokens) as a diversity proxy.

The simulation study stands in for full-scale corpus experiments: human
documents draw consecutive-sentence similarities from a configurable
distribution (default: truncated Gaussian whose interval mass equals the
configured p0), watermarked documents run the real rejection-sampling loop
with a scripted pseudo-word generator and the synthetic embedder, optional
Gaussian similarity perturbation stands in for paraphrasing, and the real
detector scores everything. Fully reproducible from (config, seed): every
document derives its own child seed from the root.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import calibration, kernels, simmetrics
from .attacks import AttackSpec, drop_attack, merge_attack
from .detection import DetectorConfig, detect_from_similarities, document_similarities
from .embedding import CachedEmbedder, SyntheticEmbedder
from .errors import MissingClass, TooShort, ValidationError
from .generation import GeneratorConfig, LlmSamplingParams, generate_document
from .segmentation import SentenceSequence, split_sentences
from .simmetrics import Interval

LABEL_HUMAN = "human"
LABEL_WATERMARKED = "watermarked"


@dataclass
class ScoreRecord:
    doc_id: str
    label: str
    z_soft: float
    n: int


@dataclass
class ScoredCorpus:
    records: list[ScoreRecord] = field(default_factory=list)

    def scores(self, label: str) -> np.ndarray:
        return np.array([r.z_soft for r in self.records if r.label == label], dtype=np.float64)

    def add(self, doc_id: str, label: str, z: float, n: int) -> None:
        self.records.append(ScoreRecord(doc_id, label, float(z), int(n)))


def roc_auc(corpus: ScoredCorpus) -> float:
    """P(watermarked score > human score), ties half; rank-based."""
    human = corpus.scores(LABEL_HUMAN)
    marked = corpus.scores(LABEL_WATERMARKED)
    if human.size == 0 or marked.size == 0:
        raise MissingClass("ROC-AUC needs at least one score per class")
    return kernels.rank_auc(human, marked)


def tp_at_fp(corpus: ScoredCorpus, fp_target: float) -> float:
    """TP rate at the threshold holding human FP to ``fp_target``.

    Threshold selection mirrors :func:`simmark.calibration.compute_beta`
    (same grid, same strict inequality) without its minimum-sample gate, so
    small evaluation corpora still score.
    """
    if not 0.0 < fp_target < 1.0:
        raise ValidationError(f"fp_target must lie in (0, 1), got {fp_target}")
    human = np.sort(corpus.scores(LABEL_HUMAN))
    marked = corpus.scores(LABEL_WATERMARKED)
    if human.size == 0 or marked.size == 0:
        raise MissingClass("TP@FP needs at least one score per class")
    j0 = round(calibration.BETA_GRID_LO / calibration.BETA_GRID_STEP)
    n_grid = round(
        (calibration.BETA_GRID_HI - calibration.BETA_GRID_LO) / calibration.BETA_GRID_STEP
    ) + 1
    idx = kernels.beta_sweep_index(human, j0, n_grid, calibration.BETA_GRID_STEP, fp_target)
    if idx < 0:
        return 0.0
    threshold = (j0 + idx) * calibration.BETA_GRID_STEP
    return float(np.mean(marked > threshold))


def ent3(text: str) -> float:
    """Shannon entropy (bits) of the whitespace-token trigram distribution."""
    tokens = text.split()
    if len(tokens) < 3:
        raise TooShort(f"need >= 3 tokens for a trigram, got {len(tokens)}")
    counts = Counter(zip(tokens, tokens[1:], tokens[2:]))
    total = sum(counts.values())
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


# ---------------------------------------------------------------------------
# scripted generator and human similarity model
# ---------------------------------------------------------------------------

_SYLLABLES = [
    "ka", "lo", "mi", "ren", "tu", "ve", "zor", "pel", "da", "sun",
    "gri", "fa", "ne", "bo", "tas", "ulm", "che", "wi", "ryn", "os",
]


class RandomSentenceGenerator:
    """Scripted stand-in for an LLM: emits fresh pseudo-word sentences."""

    def __init__(self, rng: np.random.Generator, words_range: tuple[int, int] = (5, 11)):
        self.rng = rng
        self.words_range = words_range

    def sentence(self) -> str:
        n_words = int(self.rng.integers(self.words_range[0], self.words_range[1] + 1))
        words = []
        for _ in range(n_words):
            n_syll = int(self.rng.integers(2, 4))
            idx = self.rng.integers(0, len(_SYLLABLES), size=n_syll)
            words.append("".join(_SYLLABLES[i] for i in idx))
        words[0] = words[0].capitalize()
        return " ".join(words) + "."

    def complete(self, prompt: str, params: LlmSamplingParams, n: int) -> list[str]:
        return [self.sentence() for _ in range(n)]


@dataclass
class TruncatedGaussian:
    mu: float
    sigma: float
    lo: float
    hi: float

    def _phi(self, x: float) -> float:
        return 0.5 * (1.0 + math.erf((x - self.mu) / (self.sigma * math.sqrt(2.0))))

    def mass(self, a: float, b: float) -> float:
        denom = self._phi(self.hi) - self._phi(self.lo)
        return (self._phi(min(b, self.hi)) - self._phi(max(a, self.lo))) / denom

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty(0, dtype=np.float64)
        while out.size < n:
            draw = rng.normal(self.mu, self.sigma, size=max(2 * (n - out.size), 16))
            out = np.concatenate([out, draw[(draw >= self.lo) & (draw <= self.hi)]])
        return out[:n]


def fit_human_model(interval: Interval, target_mass: float,
                    bounds: tuple[float, float]) -> TruncatedGaussian:
    """Truncated Gaussian centered on the interval whose interval mass equals
    ``target_mass`` (solved for sigma by bisection)."""
    lo, hi = bounds
    mu = 0.5 * (interval.a + interval.b)
    floor_mass = (interval.b - interval.a) / (hi - lo)
    if not floor_mass < target_mass < 1.0:
        raise ValidationError(
            f"target mass {target_mass} unreachable for interval width "
            f"{interval.width} on bounds ({lo}, {hi})"
        )
    s_lo, s_hi = 1e-4, 100.0
    for _ in range(200):
        mid = 0.5 * (s_lo + s_hi)
        if TruncatedGaussian(mu, mid, lo, hi).mass(interval.a, interval.b) > target_mass:
            s_lo = mid
        else:
            s_hi = mid
    return TruncatedGaussian(mu, 0.5 * (s_lo + s_hi), lo, hi)


# ---------------------------------------------------------------------------
# simulation study
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    seed: int = 1
    n_human: int = 500
    n_watermarked: int = 500
    sentences_per_doc: int = 20
    dim: int = 16
    embedder_seed: int = 7
    target_p0: float = 0.194
    interval: Interval | None = None  # fitted to the synthetic base distribution when None
    interval_lo_quantile: float = 0.60
    decay: float = 250.0
    n_max: int = 100
    measure: str = simmetrics.COSINE
    human_source: str = "gaussian"  # or "embedder"
    perturb_sigma: float = 0.0
    perturb_humans: bool = False
    attack: str = "none"  # none | drop | merge
    attack_p: float = 0.0
    min_sentences: int = 8
    calibration_docs: int = 300
    base_sample_sentences: int = 4000
    fp_targets: tuple[float, ...] = (0.01, 0.05)

    def __post_init__(self):
        simmetrics.validate_measure(self.measure)
        if self.human_source not in ("gaussian", "embedder"):
            raise ValidationError("human_source must be 'gaussian' or 'embedder'")
        if self.attack not in ("none", "drop", "merge"):
            raise ValidationError("attack must be 'none', 'drop' or 'merge'")
        if not 0.0 < self.target_p0 < 1.0:
            raise ValidationError("target_p0 must lie in (0, 1)")
        if self.n_human < 1 or self.n_watermarked < 1:
            raise ValidationError("need at least one document per class")
        if self.sentences_per_doc < 1:
            raise ValidationError("sentences_per_doc must be >= 1")

    @classmethod
    def from_dict(cls, rec: dict) -> "SimConfig":
        rec = dict(rec)
        interval = rec.pop("interval", None)
        if interval is not None:
            interval = Interval(float(interval[0]), float(interval[1]))
        fp_targets = tuple(rec.pop("fp_targets", (0.01, 0.05)))
        return cls(interval=interval, fp_targets=fp_targets, **rec)


@dataclass
class EvalSummary:
    roc_auc: float
    tp_at_fp: dict[float, float]
    mean_attempts: float
    latency_per_sentence_ms: float
    ent3_bits: float

    def to_dict(self) -> dict:
        return {
            "roc_auc": self.roc_auc,
            "tp_at_fp": {format(k, "g"): v for k, v in self.tp_at_fp.items()},
            "mean_attempts": self.mean_attempts,
            "latency_per_sentence_ms": self.latency_per_sentence_ms,
            "ent3_bits": self.ent3_bits,
        }


@dataclass
class SimulationResult:
    summary: EvalSummary
    corpus: ScoredCorpus
    detector: DetectorConfig
    interval: Interval
    base_p0: float


def _base_similarity_sample(cfg: SimConfig, embedder, rng: np.random.Generator) -> np.ndarray:
    gen = RandomSentenceGenerator(rng)
    chain = [gen.sentence() for _ in range(cfg.base_sample_sentences + 1)]
    emb = embedder.embed(chain)
    return simmetrics.pairwise_similarities(cfg.measure, emb)


def _human_bounds(cfg: SimConfig, base_sims: np.ndarray) -> tuple[float, float]:
    return calibration.default_range(cfg.measure, base_sims)


def run_simulation_study(cfg: SimConfig) -> SimulationResult:
    """Synthesize a labeled corpus, run the real pipeline, report metrics."""
    root = np.random.SeedSequence(cfg.seed)
    ss_base, ss_cal, ss_human, ss_wm, ss_attack, ss_perturb = root.spawn(6)

    embedder = CachedEmbedder(SyntheticEmbedder(seed=cfg.embedder_seed, dim=cfg.dim))

    # acceptance interval: quantile band of the generator's own similarity
    # distribution, so rejection sampling has the configured success rate
    base_sims = _base_similarity_sample(cfg, embedder, np.random.default_rng(ss_base))
    if cfg.interval is not None:
        interval = cfg.interval
    else:
        q = cfg.interval_lo_quantile
        if q + cfg.target_p0 >= 1.0:
            raise ValidationError("interval_lo_quantile + target_p0 must stay below 1")
        interval = Interval(
            float(np.quantile(base_sims, q)),
            float(np.quantile(base_sims, q + cfg.target_p0)),
        )
    bounds = _human_bounds(cfg, base_sims)
    base_hist = calibration.build_histogram(base_sims, bounds)
    base_p0 = calibration.estimate_p0(base_hist, interval)

    # human similarity source + detector p0 calibrated from it
    human_model = None
    if cfg.human_source == "gaussian":
        human_model = fit_human_model(interval, cfg.target_p0, bounds)

    rng_cal = np.random.default_rng(ss_cal)

    def human_sims(rng: np.random.Generator, n: int) -> np.ndarray:
        if human_model is not None:
            return human_model.sample(rng, n)
        gen = RandomSentenceGenerator(rng)
        chain = [gen.sentence() for _ in range(n + 1)]
        return simmetrics.pairwise_similarities(cfg.measure, embedder.embed(chain))

    cal_sims = human_sims(rng_cal, max(1000, 20 * cfg.sentences_per_doc))
    cal_hist = calibration.build_histogram(cal_sims, bounds)
    detector_p0 = calibration.estimate_p0(cal_hist, interval)

    # provisional detector for calibration z-scores
    base_detector = DetectorConfig(
        interval=interval, p0=detector_p0, beta=0.0, measure=cfg.measure,
        decay=cfg.decay, min_sentences=cfg.min_sentences,
    )
    cal_docs = max(cfg.calibration_docs, 100)
    cal_z = np.array([
        detect_from_similarities(
            base_detector, human_sims(rng_cal, cfg.sentences_per_doc)
        ).z_soft
        for _ in range(cal_docs)
    ])
    beta_target = max(cfg.fp_targets) if cfg.fp_targets else 0.05
    beta = calibration.compute_beta(cal_z, beta_target)
    detector = DetectorConfig(
        interval=interval, p0=detector_p0, beta=beta, measure=cfg.measure,
        decay=cfg.decay, min_sentences=cfg.min_sentences,
    )

    corpus = ScoredCorpus()
    rng_perturb = np.random.default_rng(ss_perturb)

    # human documents
    for i, child in enumerate(ss_human.spawn(cfg.n_human)):
        sims = human_sims(np.random.default_rng(child), cfg.sentences_per_doc)
        if cfg.perturb_humans and cfg.perturb_sigma > 0:
            sims = sims + rng_perturb.normal(0.0, cfg.perturb_sigma, sims.size)
        report = detect_from_similarities(detector, sims)
        corpus.add(f"human-{i}", LABEL_HUMAN, report.z_soft, report.n)

    # watermarked documents through the real rejection-sampling loop
    gen_config = GeneratorConfig(
        interval=interval, measure=cfg.measure, n_max=cfg.n_max,
        sampling=LlmSamplingParams(),
    )
    attack_children = ss_attack.spawn(cfg.n_watermarked)
    total_attempts = 0
    total_sentences = 0
    total_wall_ms = 0
    ent3_values = []
    for i, child in enumerate(ss_wm.spawn(cfg.n_watermarked)):
        doc_rng = np.random.default_rng(child)
        generator = RandomSentenceGenerator(doc_rng)
        prompt = generator.sentence()
        trace = generate_document(
            gen_config, prompt, cfg.sentences_per_doc, generator, embedder
        )
        total_attempts += sum(e.attempts for e in trace.entries)
        total_wall_ms += sum(e.wall_ms for e in trace.entries)
        total_sentences += len(trace.entries)
        ent3_values.append(ent3(trace.document))

        seq = SentenceSequence.from_texts(
            [prompt] + [s.text for s in trace.sentences], prompt_len=1
        )
        if cfg.attack != "none":
            attack_seed = int(np.random.default_rng(attack_children[i]).integers(2**32))
            spec = AttackSpec(kind=cfg.attack, p=cfg.attack_p, rng_seed=attack_seed)
            if cfg.attack == "drop":
                seq = drop_attack(spec, seq)
            else:
                seq = split_sentences(merge_attack(spec, seq.to_text()), prompt_len=1)
        sims = document_similarities(detector, seq, embedder)
        if cfg.perturb_sigma > 0:
            sims = sims + rng_perturb.normal(0.0, cfg.perturb_sigma, sims.size)
        report = detect_from_similarities(detector, sims)
        corpus.add(f"wm-{i}", LABEL_WATERMARKED, report.z_soft, report.n)

    summary = EvalSummary(
        roc_auc=roc_auc(corpus),
        tp_at_fp={t: tp_at_fp(corpus, t) for t in cfg.fp_targets},
        mean_attempts=total_attempts / max(1, total_sentences),
        latency_per_sentence_ms=total_wall_ms / max(1, total_sentences),
        ent3_bits=float(np.mean(ent3_values)) if ent3_values else 0.0,
    )
    return SimulationResult(
        summary=summary, corpus=corpus, detector=detector,
        interval=interval, base_p0=base_p0,
    )
