"""simmark: sentence-level statistical watermarking for black-box text generators.

Generation embeds the watermark by rejection-sampling next sentences until
the similarity of consecutive sentence embeddings lands in a predefined
interval; detection runs a one-proportion z-test on the soft count of
in-interval similarities. Calibration, attack simulation and evaluation
tooling round out the kit. See README.md for the CLI and wire protocols.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationModel,
    SimilarityHistogram,
    build_histogram,
    compute_beta,
    estimate_p0,
    explore_intervals,
)
from .detection import DetectionReport, DetectorConfig, detect, detect_from_similarities, z_soft
from .embedding import (
    CachedEmbedder,
    EmbedderSpec,
    EmbeddingCache,
    RemoteEmbedder,
    SyntheticEmbedder,
    build_embedder,
    embed,
    synthetic_embed,
)
from .errors import SimmarkError
from .evaluation import (
    EvalSummary,
    ScoredCorpus,
    SimConfig,
    ent3,
    roc_auc,
    run_simulation_study,
    tp_at_fp,
)
from .generation import (
    GenerationTrace,
    GeneratorConfig,
    HttpGenerator,
    LlmSamplingParams,
    generate_document,
    generate_next_sentence,
    rejection_sample,
)
from .attacks import (
    AttackSpec,
    HttpParaphraser,
    bigram_attack,
    drop_attack,
    merge_attack,
    paraphrase_document,
)
from .projection import PcaModel, pca_fit, pca_transform
from .segmentation import Sentence, SentenceSequence, consecutive_pairs, split_sentences
from .simmetrics import Interval, hard_count, interval_preset, similarity, soft_count
