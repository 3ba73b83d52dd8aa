import json
import os
import textwrap

import numpy as np
import pytest

from helpers import embed_endpoint, http_endpoint
from simmark.cli import main
from simmark.jsonutil import read_json, read_jsonl


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_config(tmp_path, extra=""):
    cfg = textwrap.dedent("""
        [embedder]
        kind = "synthetic"
        model_id = "synthetic-16"
        instruction = ""
        dim = 16
        seed = 7

        [detector]
        interval = [-0.2, 0.2]
        p0 = 0.4
        beta = 3.0
        decay = 250.0
        min_sentences = 4
    """) + textwrap.dedent(extra)
    path = tmp_path / "config.toml"
    path.write_text(cfg, encoding="utf-8")
    return str(path)


def write_corpus(tmp_path, name, texts):
    path = tmp_path / name
    with open(path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(texts):
            fh.write(json.dumps({"id": f"doc-{i}", "text": text}) + "\n")
    return str(path)


def human_docs(n=30, sentences=10, seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(n):
        parts = [
            "Word" + " ".join(f"t{rng.integers(100_000)}" for _ in range(6)) + "."
            for _ in range(sentences)
        ]
        docs.append(" ".join(parts))
    return docs


class TestUsage:
    def test_unknown_subcommand_exit_1(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand_exit_1(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_required_flag_exit_1(self, capsys):
        assert main(["detect"]) == 1


class TestDetect:
    def test_happy_path_one_report_per_record(self, workdir):
        config = write_config(workdir)
        infile = write_corpus(workdir, "in.jsonl", human_docs(5, 8))
        out = str(workdir / "reports.jsonl")
        assert main(["detect", "--config", config, "--in", infile, "--out", out]) == 0
        reports = list(read_jsonl(out))
        assert len(reports) == 5
        for rec in reports:
            assert rec["verdict"] in ("watermarked", "human", "inconclusive")
            assert rec["N"] == 7
            assert rec["id"].startswith("doc-")

    def test_missing_config_exit_1(self, workdir):
        infile = write_corpus(workdir, "in.jsonl", ["Hello there. Bye now."])
        rc = main(["detect", "--config", "nope.toml", "--in", infile,
                   "--out", str(workdir / "o.jsonl")])
        assert rc == 1


class TestCalibrateThenDetect:
    def test_round_trip(self, workdir):
        config = write_config(workdir)
        corpus = write_corpus(workdir, "human.jsonl", human_docs(120, 12, seed=3))
        cal_out = str(workdir / "cal.json")
        rc = main(["calibrate", "--config", config, "--human-corpus", corpus,
                   "--fp", "0.05", "--fp", "0.01", "--out", cal_out,
                   "--corpus-id", "unit-human"])
        assert rc == 0
        cal = read_json(cal_out)
        assert 0 < cal["p0"] < 1
        assert set(cal["beta_table"]) == {"0.05", "0.01"}
        assert cal["corpus_id"] == "unit-human"
        assert cal["embedder_model_id"] == "synthetic-16"

        config2 = write_config(workdir)
        cfg_text = open(config2, encoding="utf-8").read()
        cfg_text = cfg_text.replace("p0 = 0.4\n", "").replace("beta = 3.0\n", "")
        cfg_text += f'\n[detector.unused]\n'
        # point the detector at the calibration file instead of explicit p0/beta
        cfg_text = cfg_text.replace(
            "interval = [-0.2, 0.2]",
            f'interval = [-0.2, 0.2]\ncalibration_path = "{cal_out}"\nfp_target = 0.05',
        )
        open(config2, "w", encoding="utf-8").write(cfg_text)
        infile = write_corpus(workdir, "to-score.jsonl", human_docs(6, 10, seed=4))
        out = str(workdir / "r.jsonl")
        assert main(["detect", "--config", config2, "--in", infile, "--out", out]) == 0
        reports = list(read_jsonl(out))
        assert all(r["p0"] == cal["p0"] for r in reports)

    def test_intervals_from_calibration_histogram(self, workdir, capsys):
        config = write_config(workdir)
        corpus = write_corpus(workdir, "human.jsonl", human_docs(120, 12, seed=5))
        cal_out = str(workdir / "cal.json")
        assert main(["calibrate", "--config", config, "--human-corpus", corpus,
                     "--fp", "0.05", "--out", cal_out]) == 0
        out = str(workdir / "intervals.json")
        rc = main(["intervals", "--histogram", cal_out, "--widths", "0.08,0.15",
                   "--budget", "30", "--out", out])
        assert rc == 0
        rows = read_json(out)
        assert rows and all("p0" in r and "expected_samples" in r for r in rows)


class TestAttackCommand:
    def test_drop_attack_deterministic(self, workdir):
        infile = write_corpus(workdir, "in.jsonl", human_docs(4, 10, seed=6))
        out1 = str(workdir / "a1.jsonl")
        out2 = str(workdir / "a2.jsonl")
        for out in (out1, out2):
            rc = main(["attack", "--kind", "drop", "--p", "0.4", "--seed", "9",
                       "--in", infile, "--out", out])
            assert rc == 0
        assert open(out1).read() == open(out2).read()
        attacked = list(read_jsonl(out1))
        assert len(attacked) == 4

    def test_merge_attack(self, workdir):
        infile = write_corpus(workdir, "in.jsonl", human_docs(3, 8, seed=7))
        out = str(workdir / "m.jsonl")
        rc = main(["attack", "--kind", "merge", "--p", "0.45", "--seed", "3",
                   "--in", infile, "--out", out])
        assert rc == 0
        assert len(list(read_jsonl(out))) == 3

    def test_paraphrase_requires_endpoint(self, workdir, monkeypatch):
        monkeypatch.delenv("SIMMARK_PARAPHRASER_ENDPOINT", raising=False)
        infile = write_corpus(workdir, "in.jsonl", ["One here. Two here."])
        rc = main(["attack", "--kind", "paraphrase", "--in", infile,
                   "--out", str(workdir / "o.jsonl")])
        assert rc == 1

    def test_paraphrase_via_endpoint(self, workdir):
        def handler(method, path, payload):
            if path == "/v1/paraphrase":
                return 200, {"candidates": [payload["sentence"].replace("here", "there")]
                             * payload["n"]}
            return 404, {}

        infile = write_corpus(workdir, "in.jsonl", ["One here. Two here. Three here."])
        out = str(workdir / "p.jsonl")
        with http_endpoint(handler) as (url, _):
            rc = main(["attack", "--kind", "paraphrase", "--endpoint", url,
                       "--in", infile, "--out", out])
        assert rc == 0
        text = list(read_jsonl(out))[0]["text"]
        assert "there" in text
        assert text.startswith("One here.")  # prompt sentence untouched


class TestEvalCommand:
    def test_scores_to_summary(self, workdir):
        rng = np.random.default_rng(8)
        scores = str(workdir / "scores.jsonl")
        with open(scores, "w") as fh:
            for i in range(200):
                fh.write(json.dumps({"id": f"h{i}", "label": "human",
                                     "z_soft": float(rng.normal()), "N": 20}) + "\n")
            for i in range(200):
                fh.write(json.dumps({"id": f"w{i}", "label": "watermarked",
                                     "z_soft": float(rng.normal(loc=8)), "N": 20}) + "\n")
        out = str(workdir / "summary.json")
        assert main(["eval", "--scores", scores, "--out", out]) == 0
        summary = read_json(out)
        assert summary["roc_auc"] > 0.99
        assert set(summary["tp_at_fp"]) == {"0.01", "0.05"}


class TestSimulateCommand:
    def test_simulate_writes_summary_and_scores(self, workdir):
        cfg = workdir / "sim.json"
        cfg.write_text(json.dumps({
            "n_human": 40, "n_watermarked": 40, "sentences_per_doc": 10,
            "base_sample_sentences": 800, "calibration_docs": 100,
        }))
        out = str(workdir / "sim-out.json")
        assert main(["simulate", "--config", str(cfg), "--seed", "2", "--out", out]) == 0
        payload = read_json(out)
        assert payload["summary"]["roc_auc"] >= 0.95
        assert len(payload["scores"]) == 80
        assert payload["detector"]["p0"] > 0


class TestGenerateCommand:
    def test_generate_via_http_and_trace_out(self, workdir):
        state = {"i": 0}

        def handler(method, path, payload):
            if path == "/v1/generate":
                out = []
                for _ in range(payload["n"]):
                    state["i"] += 1
                    out.append(f"Generated sentence number {state['i']} goes here. tail")
                return 200, {"completions": out}
            return 404, {}

        config = write_config(workdir, extra="""
            [generator]
            interval = [-1.0, 1.0]
            n_max = 10
            model_id = "scripted"
        """)
        prompt = workdir / "prompt.txt"
        prompt.write_text("The opening sentence of the story.")
        trace_out = str(workdir / "trace.json")
        with http_endpoint(handler) as (url, _):
            # endpoint comes from the environment override
            os.environ["SIMMARK_LLM_ENDPOINT"] = url
            try:
                rc = main(["generate", "--config", config, "--prompt-file", str(prompt),
                           "--sentences", "3", "--trace-out", trace_out])
            finally:
                del os.environ["SIMMARK_LLM_ENDPOINT"]
        assert rc == 0
        trace = read_json(trace_out)
        assert len(trace["sentences"]) == 3
        assert all(s.endswith("goes here.") for s in trace["sentences"])
        assert trace["document"].startswith("The opening sentence")

    def test_generator_down_exit_2(self, workdir):
        def handler(method, path, payload):
            return 503, {"error": "down"}

        config = write_config(workdir, extra="""
            [generator]
            interval = [-1.0, 1.0]
            model_id = "scripted"
        """)
        prompt = workdir / "prompt.txt"
        prompt.write_text("A prompt.")
        with http_endpoint(handler) as (url, _):
            os.environ["SIMMARK_LLM_ENDPOINT"] = url
            try:
                rc = main(["generate", "--config", config, "--prompt-file", str(prompt),
                           "--sentences", "1", "--trace-out", str(workdir / "t.json")])
            finally:
                del os.environ["SIMMARK_LLM_ENDPOINT"]
        assert rc == 2
