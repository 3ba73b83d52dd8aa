"""Application configuration: structured file (TOML or JSON) + env overrides.

Endpoints may be overridden with SIMMARK_EMBED_ENDPOINT, SIMMARK_LLM_ENDPOINT
and SIMMARK_PARAPHRASER_ENDPOINT; the API key only ever travels through
SIMMARK_API_KEY and is never serialized into outputs. Cross-references are
checked at load time: a PCA model or calibration model fitted under a
different embedder is a startup error, never a silent fallback.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass

from .attacks import AttackSpec
from .calibration import CalibrationModel
from .detection import DetectorConfig
from .embedding import EmbedderSpec
from .errors import ConfigError, ProvenanceMismatch, ValidationError
from .generation import GeneratorConfig, LlmSamplingParams
from .jsonutil import read_json
from .projection import PcaModel
from .simmetrics import Interval, default_instruction, interval_preset

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class AppConfig:
    embedder: EmbedderSpec
    generator: GeneratorConfig | None = None
    detector: DetectorConfig | None = None
    attack: AttackSpec | None = None
    calibration: CalibrationModel | None = None
    log_level: str = "info"


def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    if path.endswith(".json"):
        return read_json(path)
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _resolve_interval(section: dict) -> tuple[Interval | None, str | None, bool | None]:
    """(interval, measure, use_pca) from either an explicit pair or a preset."""
    if "interval" in section:
        a, b = section["interval"]
        return Interval(float(a), float(b)), section.get("measure"), section.get("use_pca")
    if "preset" in section:
        interval, measure, use_pca = interval_preset(section["preset"])
        return (
            interval,
            section.get("measure", measure),
            section.get("use_pca", use_pca),
        )
    return None, section.get("measure"), section.get("use_pca")


def _load_pca(section: dict, embedder: EmbedderSpec) -> PcaModel | None:
    path = section.get("pca_path")
    if not path:
        return None
    model = PcaModel.load(path)
    try:
        model.check_provenance(embedder.model_id, embedder.instruction)
    except ProvenanceMismatch as exc:
        raise ConfigError(str(exc)) from exc
    return model


def _build_embedder_spec(section: dict) -> EmbedderSpec:
    kind = section.get("kind", "synthetic")
    endpoint = os.environ.get("SIMMARK_EMBED_ENDPOINT", section.get("endpoint", ""))
    instruction = section.get("instruction")
    if instruction is None:
        instruction = default_instruction(
            section.get("measure", "cosine"), bool(section.get("use_pca", False))
        )
    return EmbedderSpec(
        kind=kind,
        model_id=section.get("model_id", "synthetic"),
        instruction=instruction,
        dim=int(section.get("dim", 16)),
        endpoint=endpoint,
        timeout_ms=int(section.get("timeout_ms", 30000)),
        max_retries=int(section.get("max_retries", 3)),
        seed=int(section.get("seed", 0)),
        batch_size=int(section.get("batch_size", 32)),
        cache_path=section.get("cache_path"),
    )


def _build_generator(section: dict, embedder: EmbedderSpec) -> GeneratorConfig:
    interval, measure, use_pca = _resolve_interval(section)
    if interval is None:
        raise ConfigError("generator section needs an interval or a preset")
    sampling_raw = section.get("sampling", {})
    sampling = LlmSamplingParams(
        temperature=float(sampling_raw.get("temperature", 0.7)),
        repetition_penalty=float(sampling_raw.get("repetition_penalty", 1.05)),
        min_new_tokens=int(sampling_raw.get("min_new_tokens", 195)),
        max_new_tokens=int(sampling_raw.get("max_new_tokens", 205)),
    )
    pca = _load_pca(section, embedder)
    use_pca = bool(use_pca) if use_pca is not None else pca is not None
    return GeneratorConfig(
        interval=interval,
        measure=measure or "cosine",
        use_pca=use_pca,
        pca=pca,
        n_max=int(section.get("n_max", 100)),
        sampling=sampling,
        llm_endpoint=os.environ.get("SIMMARK_LLM_ENDPOINT", section.get("llm_endpoint", "")),
        model_id=section.get("model_id", ""),
        batch_candidates=int(section.get("batch_candidates", 1)),
    )


def _build_detector(
    section: dict, embedder: EmbedderSpec
) -> tuple[DetectorConfig, CalibrationModel | None]:
    interval, measure, use_pca = _resolve_interval(section)
    measure = measure or "cosine"
    pca = _load_pca(section, embedder)
    use_pca = bool(use_pca) if use_pca is not None else pca is not None

    cal = None
    p0 = section.get("p0")
    beta = section.get("beta")
    cal_path = section.get("calibration_path")
    if cal_path:
        cal = CalibrationModel.load(cal_path)
        if cal.embedder_model_id and cal.embedder_model_id != embedder.model_id:
            raise ConfigError(
                f"calibration model was built under embedder {cal.embedder_model_id!r}, "
                f"config uses {embedder.model_id!r}"
            )
        if cal.measure != measure:
            raise ConfigError(
                f"calibration measure {cal.measure!r} != detector measure {measure!r}"
            )
        if bool(cal.use_pca) != bool(use_pca):
            raise ConfigError("calibration and detector disagree on use_pca")
        if interval is None:
            interval = cal.interval
        elif cal.interval is not None and (
            not math.isclose(cal.interval.a, interval.a)
            or not math.isclose(cal.interval.b, interval.b)
        ):
            raise ConfigError(
                f"calibration interval {cal.interval.as_tuple()} != "
                f"detector interval {interval.as_tuple()}"
            )
        if p0 is None:
            p0 = cal.p0
        if beta is None:
            beta = cal.beta_for(float(section.get("fp_target", 0.05)))
    if interval is None:
        raise ConfigError("detector section needs an interval, a preset, or a calibration model")
    if p0 is None or beta is None:
        raise ConfigError("detector needs p0 and beta (explicit or via calibration_path)")

    decay = section.get("decay", 250.0)
    if isinstance(decay, str) and decay.lower() in ("inf", "infinity"):
        decay = math.inf
    detector = DetectorConfig(
        interval=interval,
        p0=float(p0),
        beta=float(beta),
        measure=measure,
        use_pca=use_pca,
        pca=pca,
        decay=float(decay),
        min_sentences=int(section.get("min_sentences", 8)),
    )
    return detector, cal


def _build_attack(section: dict) -> AttackSpec:
    endpoint = os.environ.get(
        "SIMMARK_PARAPHRASER_ENDPOINT", section.get("paraphraser_endpoint", "")
    )
    kwargs = dict(
        kind=section.get("kind", "paraphrase"),
        paraphraser_endpoint=endpoint,
        n_candidates=int(section.get("n_candidates", 10)),
        p=float(section.get("p", 0.0)),
        rng_seed=int(section.get("rng_seed", 0)),
        objective=section.get("objective", "soft"),
    )
    if "prompt_template" in section:
        kwargs["prompt_template"] = section["prompt_template"]
    return AttackSpec(**kwargs)


def load_app_config(path: str) -> AppConfig:
    """Parse, cross-validate and assemble the full application config."""
    raw = _read_config_file(path)
    try:
        embedder = _build_embedder_spec(raw.get("embedder", {}))
        generator = None
        if "generator" in raw:
            generator = _build_generator(raw["generator"], embedder)
        detector = None
        cal = None
        if "detector" in raw:
            detector, cal = _build_detector(raw["detector"], embedder)
        attack = _build_attack(raw["attack"]) if "attack" in raw else None
    except (ValidationError, KeyError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    log_level = raw.get("logging", {}).get("level", "info")
    return AppConfig(
        embedder=embedder, generator=generator, detector=detector,
        attack=attack, calibration=cal, log_level=log_level,
    )
