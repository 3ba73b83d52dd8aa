import numpy as np
import pytest

from helpers import ScriptedGenerator, WordSaladGenerator, http_endpoint
from simmark.embedding import CachedEmbedder, SyntheticEmbedder
from simmark.errors import GeneratorUnavailable, InvalidRequest, ValidationError
from simmark.generation import (
    GeneratorConfig,
    HttpGenerator,
    LlmSamplingParams,
    generate_document,
    generate_next_sentence,
    rejection_sample,
)
from simmark.segmentation import split_sentences
from simmark.simmetrics import Interval


def truncated_geometric_mean(p: float, n_max: int) -> float:
    """Closed-form E[attempts]: geometric truncated at n_max (last accepted)."""
    ks = np.arange(1, n_max)
    return float(np.sum(ks * p * (1 - p) ** (ks - 1)) + n_max * (1 - p) ** (n_max - 1))


class TestRejectionLoop:
    def test_immediate_acceptance(self):
        text, attempts, sim = rejection_sample(
            lambda n: ["candidate"] * n, lambda c: 0.5, Interval(0.4, 0.6), n_max=5
        )
        assert (text, attempts, sim) == ("candidate", 1, 0.5)

    def test_never_valid_accepts_last_at_n_max(self):
        served = []

        def fetch(n):
            out = [f"c{len(served) + i}" for i in range(n)]
            served.extend(out)
            return out

        text, attempts, sim = rejection_sample(
            fetch, lambda c: 0.0, Interval(0.4, 0.6), n_max=5
        )
        assert attempts == 5
        assert text == "c4"  # the last generated candidate
        assert sim == 0.0
        assert len(served) == 5

    def test_bernoulli_acceptance_matches_truncated_geometric(self):
        interval = Interval(0.4, 0.6)
        for p in (0.1, 0.194, 0.5):
            rng = np.random.default_rng(hash(p) % (2**32))
            attempts_sum = 0
            n_docs = 10_000
            for _ in range(n_docs):
                draws = iter(rng.random(200))
                _, attempts, _ = rejection_sample(
                    lambda n: ["x"] * n,
                    lambda c: 0.5 if next(draws) < p else 0.0,
                    interval,
                    n_max=100,
                )
                attempts_sum += attempts
            mean = attempts_sum / n_docs
            expected = truncated_geometric_mean(p, 100)
            assert mean == pytest.approx(expected, rel=0.10)


class TestGenerateNextSentence:
    def _setup(self, completions, interval=(-0.2, 0.2), n_max=5):
        config = GeneratorConfig(interval=Interval(*interval), n_max=n_max)
        embedder = CachedEmbedder(SyntheticEmbedder(seed=3, dim=16))
        context = split_sentences("The starting sentence.", prompt_len=1)
        return config, embedder, context, ScriptedGenerator(completions)

    def test_accepts_first_in_interval(self):
        # wide interval: any candidate lands inside immediately
        config, embedder, context, gen = self._setup(
            ["A brand new sentence. Trailing fragment"], interval=(-1.0, 1.0)
        )
        sentence, entry = generate_next_sentence(config, context, gen, embedder)
        assert sentence.text == "A brand new sentence."  # fragment discarded
        assert entry.attempts == 1
        assert entry.accepted_in_interval is True

    def test_exhausts_n_max_and_accepts_last(self):
        # impossible interval: cosine similarity can never exceed 1
        config, embedder, context, gen = self._setup(
            ["Alpha one. x", "Beta two. y", "Gamma three. z"],
            interval=(1.5, 2.0), n_max=5,
        )
        sentence, entry = generate_next_sentence(config, context, gen, embedder)
        assert entry.attempts == 5
        assert entry.accepted_in_interval is False
        assert sentence.text in ("Alpha one.", "Beta two.", "Gamma three.")
        assert gen.served == 5

    def test_trace_invariant_interval_xor_nmax(self):
        rng = np.random.default_rng(0)
        config = GeneratorConfig(interval=Interval(-0.05, 0.1), n_max=8)
        embedder = CachedEmbedder(SyntheticEmbedder(seed=5, dim=16))
        gen = WordSaladGenerator(seed=11)
        context = split_sentences("Seed sentence for the chain.", prompt_len=1)
        for _ in range(30):
            sentence, entry = generate_next_sentence(config, context, gen, embedder)
            assert 1 <= entry.attempts <= config.n_max
            in_int = config.interval.contains(entry.final_similarity)
            assert entry.accepted_in_interval == in_int
            assert in_int or entry.attempts == config.n_max
            context.sentences.append(sentence)


class TestGenerateDocument:
    def test_rejects_non_positive_count(self, embedder16):
        config = GeneratorConfig(interval=Interval(-1.0, 1.0))
        gen = WordSaladGenerator(seed=1)
        with pytest.raises(InvalidRequest):
            generate_document(config, "A prompt.", 0, gen, embedder16)

    def test_deterministic_trace(self):
        config = GeneratorConfig(interval=Interval(-0.05, 0.15), n_max=10)

        def run():
            embedder = CachedEmbedder(SyntheticEmbedder(seed=4, dim=16))
            gen = WordSaladGenerator(seed=9)
            return generate_document(config, "Prompt sentence here.", 6, gen, embedder)

        a, b = run(), run()
        assert [s.text for s in a.sentences] == [s.text for s in b.sentences]
        assert [e.attempts for e in a.entries] == [e.attempts for e in b.entries]
        assert [e.final_similarity for e in a.entries] == [
            e.final_similarity for e in b.entries
        ]
        assert a.document == b.document

    def test_always_valid_means_one_call_per_sentence(self, embedder16):
        config = GeneratorConfig(interval=Interval(-1.0, 1.0), n_max=100)
        gen = WordSaladGenerator(seed=2)
        trace = generate_document(config, "The prompt.", 20, gen, embedder16)
        assert len(trace.sentences) == 20
        assert sum(e.attempts for e in trace.entries) == 20
        assert all(e.accepted_in_interval for e in trace.entries)

    def test_document_assembles_prompt_and_sentences(self, embedder16):
        config = GeneratorConfig(interval=Interval(-1.0, 1.0))
        gen = ScriptedGenerator(["Body one.", "Body two."])
        trace = generate_document(config, "The prompt.", 2, gen, embedder16)
        assert trace.document == "The prompt. Body one. Body two."
        resplit = split_sentences(trace.document)
        assert [s.text for s in resplit] == ["The prompt.", "Body one.", "Body two."]


class TestCandidateBatching:
    def test_batched_rounds_match_single_candidate_order(self):
        # same candidate stream judged in the same order: the batch size
        # must not change which sentence gets accepted or the attempt count
        completions = [f"Candidate number {i} text. x" for i in range(12)]
        results = {}
        for batch in (1, 3, 5):
            config = GeneratorConfig(interval=Interval(-0.05, 0.15), n_max=10,
                                     batch_candidates=batch)
            embedder = CachedEmbedder(SyntheticEmbedder(seed=6, dim=16))
            gen = ScriptedGenerator(completions)
            context = split_sentences("Anchor sentence for all runs.", prompt_len=1)
            sentence, entry = generate_next_sentence(config, context, gen, embedder)
            results[batch] = (sentence.text, entry.attempts, entry.final_similarity)
        assert results[1] == results[3] == results[5]


class TestEmbedderFailureMapping:
    def test_embedder_outage_raises_named_error(self):
        from simmark.errors import EmbedderUnavailable, RemoteUnavailable

        class DeadEmbedder:
            model_id = "dead"
            instruction = ""
            dim = 16

            def embed(self, texts):
                raise RemoteUnavailable("endpoint down")

        config = GeneratorConfig(interval=Interval(-1.0, 1.0))
        gen = WordSaladGenerator(seed=3)
        context = split_sentences("The prompt.", prompt_len=1)
        with pytest.raises(EmbedderUnavailable):
            generate_next_sentence(config, context, gen, DeadEmbedder())


class TestHttpGenerator:
    def test_payload_carries_sampling_params(self):
        def handler(method, path, payload):
            if path == "/v1/generate":
                return 200, {"completions": ["Generated text here." for _ in range(payload["n"])]}
            return 404, {}

        with http_endpoint(handler) as (url, log):
            gen = HttpGenerator(url, "test-model", backoff_base_s=0.01)
            params = LlmSamplingParams(temperature=0.7, repetition_penalty=1.05,
                                       min_new_tokens=195, max_new_tokens=205)
            out = gen.complete("prompt text", params, 3)
            assert len(out) == 3
            body = log[0]["payload"]
            assert body["model"] == "test-model"
            assert body["temperature"] == 0.7
            assert body["repetition_penalty"] == 1.05
            assert body["min_new_tokens"] == 195
            assert body["max_new_tokens"] == 205
            assert body["n"] == 3

    def test_retry_then_unavailable(self):
        calls = {"n": 0}

        def handler(method, path, payload):
            calls["n"] += 1
            return 503, {"error": "down"}

        with http_endpoint(handler) as (url, _):
            gen = HttpGenerator(url, "m", max_retries=2, backoff_base_s=0.01)
            with pytest.raises(GeneratorUnavailable):
                gen.complete("p", LlmSamplingParams(), 1)
            assert calls["n"] == 3


class TestParamValidation:
    def test_sampling_params(self):
        with pytest.raises(ValidationError):
            LlmSamplingParams(temperature=0.0)
        with pytest.raises(ValidationError):
            LlmSamplingParams(min_new_tokens=300, max_new_tokens=200)

    def test_generator_config(self):
        with pytest.raises(ValidationError):
            GeneratorConfig(interval=Interval(0, 1), n_max=0)
        with pytest.raises(ValidationError):
            GeneratorConfig(interval=Interval(0, 1), use_pca=True)
