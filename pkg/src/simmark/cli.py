"""Unified command-line entry point.

Subcommands: generate | detect | calibrate | intervals | attack | eval |
simulate | serve. Corpora are JSON-lines files of {"id", "text"[, "label"]}
records; all outputs are written atomically (temp file + rename). Exit codes:
0 success, 1 validation/usage error, 2 runtime or remote failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .attacks import AttackSpec, HttpParaphraser, apply_attack
from .calibration import (
    CalibrationModel,
    SimilarityHistogram,
    build_histogram,
    compute_beta,
    default_range,
    estimate_p0,
    explore_intervals,
)
from .config import load_app_config
from .detection import DetectorConfig, detect, detect_from_similarities, document_similarities
from .embedding import build_embedder
from .errors import RuntimeFailure, SimmarkError, ValidationError
from .evaluation import (
    LABEL_HUMAN,
    LABEL_WATERMARKED,
    ScoredCorpus,
    roc_auc,
    run_simulation_study,
    tp_at_fp,
    SimConfig,
)
from .generation import HttpGenerator, generate_document
from .jsonutil import read_json, read_jsonl, write_json_exact, write_jsonl
from .segmentation import split_sentences
from .service import serve as run_service
from .simmetrics import Interval

log = logging.getLogger("simmark")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="simmark", description=__doc__)
    parser.add_argument("--version", action="version", version=f"simmark {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", help="generate watermarked text via rejection sampling")
    p.add_argument("--config", required=True)
    p.add_argument("--prompt-file", required=True)
    p.add_argument("--sentences", type=int, required=True)
    p.add_argument("--trace-out", required=True)

    p = sub.add_parser("detect", help="score documents with the soft z-test")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("calibrate", help="estimate p0 and FP thresholds from a human corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--human-corpus", required=True)
    p.add_argument("--fp", type=float, action="append", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus-id", default="")

    p = sub.add_parser("intervals", help="explore candidate acceptance intervals")
    p.add_argument("--histogram", required=True, help="human similarity histogram")
    p.add_argument("--widths", required=True, help="comma-separated interval widths")
    p.add_argument("--acceptance-histogram", default=None,
                   help="generating model's similarity histogram (for sampling cost)")
    p.add_argument("--budget", type=float, default=25.0)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", default=None)

    p = sub.add_parser("attack", help="apply an adversarial transformation to a corpus")
    p.add_argument("--kind", required=True,
                   choices=["paraphrase", "bigram", "drop", "merge",
                            "paraphrase+drop", "paraphrase+merge"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--config", default=None, help="needed for bigram (detector + embedder)")

    p = sub.add_parser("eval", help="ROC-AUC and TP@FP from a scored corpus")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fp", type=float, action="append", default=None)

    p = sub.add_parser("simulate", help="run the synthetic end-to-end simulation study")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="HTTP detection service")
    p.add_argument("--config", required=True)
    p.add_argument("--bind", default="127.0.0.1:8641")
    return parser


def _cmd_generate(args) -> int:
    cfg = load_app_config(args.config)
    if cfg.generator is None:
        raise ValidationError("config has no [generator] section")
    if not cfg.generator.llm_endpoint:
        raise ValidationError("generator endpoint missing (config or SIMMARK_LLM_ENDPOINT)")
    with open(args.prompt_file, "r", encoding="utf-8") as fh:
        prompt = fh.read()
    embedder = build_embedder(cfg.embedder)
    generator = HttpGenerator(cfg.generator.llm_endpoint, cfg.generator.model_id)
    trace = generate_document(cfg.generator, prompt, args.sentences, generator, embedder)
    write_json_exact(args.trace_out, trace.to_dict())
    log.info("generated %d sentences, mean attempts %.2f",
             len(trace.sentences), trace.mean_attempts())
    return 0


def _cmd_detect(args) -> int:
    cfg = load_app_config(args.config)
    if cfg.detector is None:
        raise ValidationError("config has no [detector] section")
    embedder = build_embedder(cfg.embedder)
    reports = []
    for rec in read_jsonl(args.infile):
        report = detect(cfg.detector, rec.get("text", ""), embedder, doc_id=rec.get("id"))
        reports.append(report.to_dict())
    write_jsonl(args.out, reports, exact=True)
    return 0


def _cmd_calibrate(args) -> int:
    cfg = load_app_config(args.config)
    if cfg.detector is None:
        raise ValidationError("config has no [detector] section")
    detector = cfg.detector
    embedder = build_embedder(cfg.embedder)
    fp_targets = args.fp or [0.01, 0.05]

    doc_sims = []
    for rec in read_jsonl(args.human_corpus):
        try:
            seq = split_sentences(rec["text"])
        except SimmarkError:
            continue
        sims = document_similarities(detector, seq, embedder)
        if sims.size:
            doc_sims.append(sims)
    if not doc_sims:
        raise ValidationError("human corpus yielded no similarity pairs")
    all_sims = np.concatenate(doc_sims)
    hist = build_histogram(all_sims, default_range(detector.measure, all_sims))
    p0 = estimate_p0(hist, detector.interval)

    scorer = DetectorConfig(
        interval=detector.interval, p0=p0, beta=0.0, measure=detector.measure,
        use_pca=detector.use_pca, pca=detector.pca, decay=detector.decay,
        min_sentences=detector.min_sentences,
    )
    z_scores = np.array([detect_from_similarities(scorer, s).z_soft for s in doc_sims])
    beta_table = {format(t, "g"): compute_beta(z_scores, t) for t in fp_targets}

    model = CalibrationModel(
        histogram=hist, p0=p0, beta_table=beta_table,
        corpus_id=args.corpus_id or args.human_corpus,
        embedder_model_id=cfg.embedder.model_id, measure=detector.measure,
        use_pca=detector.use_pca, interval=detector.interval,
    )
    model.save(args.out)
    log.info("calibrated p0=%.6f, betas=%s over %d docs", p0, beta_table, len(doc_sims))
    return 0


def _load_histogram(path: str) -> SimilarityHistogram:
    raw = read_json(path)
    if "histogram" in raw:
        raw = raw["histogram"]
    return SimilarityHistogram.from_dict(raw)


def _cmd_intervals(args) -> int:
    hist = _load_histogram(args.histogram)
    acceptance = (
        _load_histogram(args.acceptance_histogram) if args.acceptance_histogram else None
    )
    widths = [float(w) for w in args.widths.split(",") if w.strip()]
    ranked = explore_intervals(hist, widths, acceptance_hist=acceptance, budget=args.budget)
    rows = [
        {
            "interval": [c.interval.a, c.interval.b],
            "p0": c.p0,
            "expected_samples": c.expected_samples,
        }
        for c in ranked[: args.top]
    ]
    if args.out:
        write_json_exact(args.out, rows)
    for row in rows:
        print(
            f"[{row['interval'][0]:.4f}, {row['interval'][1]:.4f}]  "
            f"p0={row['p0']:.4f}  E[samples]={row['expected_samples']:.2f}"
        )
    return 0


def _make_attack_spec(args, seed: int) -> AttackSpec:
    if args.kind in ("paraphrase+drop", "paraphrase+merge"):
        tail = args.kind.split("+")[1]
        return AttackSpec(
            kind="composed",
            stages=[
                AttackSpec(kind="paraphrase", paraphraser_endpoint=args.endpoint or "",
                           n_candidates=args.n, rng_seed=seed),
                AttackSpec(kind=tail, p=args.p, rng_seed=seed),
            ],
        )
    return AttackSpec(kind=args.kind, paraphraser_endpoint=args.endpoint or "",
                      n_candidates=args.n, p=args.p, rng_seed=seed)


def _cmd_attack(args) -> int:
    detector = None
    embedder = None
    if args.config:
        cfg = load_app_config(args.config)
        detector = cfg.detector
        embedder = build_embedder(cfg.embedder)
    paraphraser = None
    needs_paraphraser = args.kind in ("paraphrase", "bigram", "paraphrase+drop",
                                      "paraphrase+merge")
    if needs_paraphraser:
        import os

        endpoint = args.endpoint or os.environ.get("SIMMARK_PARAPHRASER_ENDPOINT", "")
        if not endpoint:
            raise ValidationError("paraphrase attacks need --endpoint or "
                                  "SIMMARK_PARAPHRASER_ENDPOINT")
        args.endpoint = endpoint
        paraphraser = HttpParaphraser(endpoint)
    if args.kind == "bigram" and (detector is None or embedder is None):
        raise ValidationError("bigram attack needs --config with a [detector] section")

    out = []
    for idx, rec in enumerate(read_jsonl(args.infile)):
        seq = split_sentences(rec["text"])
        spec = _make_attack_spec(args, seed=args.seed + idx)
        attacked = apply_attack(spec, seq, detector=detector,
                                paraphraser=paraphraser, embedder=embedder)
        out.append({"id": rec.get("id", str(idx)), "text": attacked.to_text()})
    write_jsonl(args.out, out)
    return 0


def _cmd_eval(args) -> int:
    corpus = ScoredCorpus()
    for rec in read_jsonl(args.scores):
        corpus.add(rec.get("id", ""), rec["label"], float(rec["z_soft"]), int(rec.get("N", 0)))
    fp_targets = args.fp or [0.01, 0.05]
    summary = {
        "roc_auc": roc_auc(corpus),
        "tp_at_fp": {format(t, "g"): tp_at_fp(corpus, t) for t in fp_targets},
        "n_human": int(sum(r.label == LABEL_HUMAN for r in corpus.records)),
        "n_watermarked": int(sum(r.label == LABEL_WATERMARKED for r in corpus.records)),
        "mean_attempts": None,
        "latency_per_sentence_ms": None,
        "ent3_bits": None,
    }
    write_json_exact(args.out, summary)
    print(f"roc_auc={summary['roc_auc']:.4f} tp_at_fp={summary['tp_at_fp']}")
    return 0


def _cmd_simulate(args) -> int:
    if args.config:
        raw = read_json(args.config) if args.config.endswith(".json") else None
        if raw is None:
            import tomli  # config may be TOML

            with open(args.config, "rb") as fh:
                raw = tomli.load(fh)
        sim_cfg = SimConfig.from_dict(raw)
    else:
        sim_cfg = SimConfig()
    if args.seed is not None:
        sim_cfg.seed = args.seed
    result = run_simulation_study(sim_cfg)
    payload = {
        "summary": result.summary.to_dict(),
        "interval": [result.interval.a, result.interval.b],
        "base_p0": result.base_p0,
        "detector": {"p0": result.detector.p0, "beta": result.detector.beta},
        "scores": [
            {"id": r.doc_id, "label": r.label, "z_soft": r.z_soft, "N": r.n}
            for r in result.corpus.records
        ],
    }
    write_json_exact(args.out, payload)
    print(
        f"roc_auc={result.summary.roc_auc:.4f} "
        f"tp_at_fp={result.summary.tp_at_fp} "
        f"mean_attempts={result.summary.mean_attempts:.2f}"
    )
    return 0


def _cmd_serve(args) -> int:
    cfg = load_app_config(args.config)
    if cfg.detector is None:
        raise ValidationError("config has no [detector] section")
    embedder = build_embedder(cfg.embedder)
    provenance = {
        "embedder_model_id": cfg.embedder.model_id,
        "measure": cfg.detector.measure,
        "interval": list(cfg.detector.interval.as_tuple()),
        "p0": cfg.detector.p0,
        "beta": cfg.detector.beta,
    }
    if cfg.calibration is not None:
        provenance["calibration_corpus_id"] = cfg.calibration.corpus_id
    log.info("serving on %s", args.bind)
    run_service(args.bind, cfg.detector, embedder, provenance)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "detect": _cmd_detect,
    "calibrate": _cmd_calibrate,
    "intervals": _cmd_intervals,
    "attack": _cmd_attack,
    "eval": _cmd_eval,
    "simulate": _cmd_simulate,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
