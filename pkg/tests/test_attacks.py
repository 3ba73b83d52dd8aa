import numpy as np
import pytest

from helpers import IdentityParaphraser, ScrambleParaphraser, http_endpoint
from simmark.attacks import (
    AttackSpec,
    HttpParaphraser,
    apply_attack,
    bigram_attack,
    drop_attack,
    merge_attack,
    paraphrase_document,
)
from simmark.detection import DetectorConfig
from simmark.embedding import CachedEmbedder, SyntheticEmbedder
from simmark.errors import AllDropped, InvalidProbability, ValidationError
from simmark.segmentation import SentenceSequence, split_sentences
from simmark.simmetrics import Interval


def ten_sentences():
    texts = [f"Sentence number {i} sits here." for i in range(10)]
    return SentenceSequence.from_texts(texts, prompt_len=1)


class TestParaphraseDocument:
    def test_identity_paraphraser_is_identity(self):
        seq = ten_sentences()
        spec = AttackSpec(kind="paraphrase")
        out = paraphrase_document(spec, seq, IdentityParaphraser())
        assert out.sequence.texts() == seq.texts()
        assert out.fallback_indices == []

    def test_template_rendering_verbatim(self):
        seq = SentenceSequence.from_texts(["C.", "S."], prompt_len=1)
        spec = AttackSpec(kind="paraphrase")
        para = IdentityParaphraser()
        paraphrase_document(spec, seq, para)
        req = para.requests[0]
        assert req["sentence"] == "S."
        assert "Previous context: C." in req["prompt"]
        assert "S." in req["prompt"]

    def test_context_chains_paraphrased_prefix(self):
        seq = SentenceSequence.from_texts(["P.", "A.", "B."], prompt_len=1)
        para = ScrambleParaphraser(seed=1)

        class Tracking(ScrambleParaphraser):
            def __init__(self):
                super().__init__(seed=1)
                self.contexts = []

            def paraphrase(self, sentence, context, n, prompt):
                self.contexts.append(context)
                return super().paraphrase(sentence, context, n, prompt)

        para = Tracking()
        out = paraphrase_document(AttackSpec(kind="paraphrase"), seq, para)
        assert para.contexts[0] == "P."
        # the second request's context carries the already-paraphrased A
        assert para.contexts[1] == "P. " + out.sequence.texts()[1]

    def test_empty_paraphrase_falls_back_and_records(self):
        class Empty:
            def paraphrase(self, sentence, context, n, prompt):
                return [""]

        seq = ten_sentences()
        out = paraphrase_document(AttackSpec(kind="paraphrase"), seq, Empty())
        assert out.sequence.texts() == seq.texts()
        assert out.fallback_indices == list(range(1, 10))

    def test_sentence_count_preserved(self):
        seq = ten_sentences()
        out = paraphrase_document(AttackSpec(kind="paraphrase"), seq, ScrambleParaphraser())
        assert len(out.sequence) == len(seq)

    def test_deterministic_given_paraphraser(self):
        seq = ten_sentences()
        a = paraphrase_document(AttackSpec(kind="paraphrase"), seq, ScrambleParaphraser(seed=3))
        b = paraphrase_document(AttackSpec(kind="paraphrase"), seq, ScrambleParaphraser(seed=3))
        assert a.sequence.texts() == b.sequence.texts()


class TestBigramAttack:
    def _detector(self):
        return DetectorConfig(
            interval=Interval(-0.1, 0.25), p0=0.2, beta=3.0, min_sentences=2
        )

    def test_argmin_selection(self, embedder16):
        detector = self._detector()
        seq = SentenceSequence.from_texts(["P.", "A."], prompt_len=1)

        class Canned:
            def paraphrase(self, sentence, context, n, prompt):
                return ["cand zero.", "cand one.", "cand two."]

        spec = AttackSpec(kind="bigram", n_candidates=3)
        out = bigram_attack(spec, seq, detector, Canned(), embedder16)
        # recompute the soft counts the adversary saw and check the argmin
        from simmark.simmetrics import similarity, soft_count

        anchor = embedder16.embed(["P."])[0]
        scores = []
        for cand in ["cand zero.", "cand one.", "cand two."]:
            vec = embedder16.embed([cand])[0]
            scores.append(soft_count(similarity("cosine", anchor, vec),
                                     detector.interval, detector.decay))
        assert out.sequence.texts()[1] == ["cand zero.", "cand one.", "cand two."][
            int(np.argmin(scores))
        ]

    def test_tie_break_lowest_index(self, embedder16):
        detector = self._detector()
        seq = SentenceSequence.from_texts(["P.", "A."], prompt_len=1)

        class AllSame:
            def paraphrase(self, sentence, context, n, prompt):
                return ["identical candidate."] * n

        spec = AttackSpec(kind="bigram", n_candidates=4)
        out = bigram_attack(spec, seq, detector, AllSame(), embedder16)
        assert out.sequence.texts()[1] == "identical candidate."

    def test_never_above_candidate_minimum(self, embedder16):
        from simmark.simmetrics import similarity, soft_count

        detector = self._detector()
        rng = np.random.default_rng(0)
        texts = ["P."] + [f"Body {i} text." for i in range(6)]
        seq = SentenceSequence.from_texts(texts, prompt_len=1)
        para = ScrambleParaphraser(seed=5)
        spec = AttackSpec(kind="bigram", n_candidates=5)
        out = bigram_attack(spec, seq, detector, para, embedder16)
        # chosen candidate attains the minimum soft count at every step
        prev = "P."
        for original, chosen in zip(seq.texts()[1:], out.sequence.texts()[1:]):
            candidates = para.paraphrase(original, "", 5, "")
            anchor = embedder16.embed([prev])[0]
            counts = [
                soft_count(
                    similarity("cosine", anchor, embedder16.embed([c])[0]),
                    detector.interval, detector.decay,
                )
                for c in candidates
            ]
            chosen_count = soft_count(
                similarity("cosine", anchor, embedder16.embed([chosen])[0]),
                detector.interval, detector.decay,
            )
            assert chosen_count == min(counts)
            prev = chosen

    def test_requires_two_candidates(self):
        with pytest.raises(ValidationError):
            AttackSpec(kind="bigram", n_candidates=1)

    def test_edit_distance_objective(self, embedder16):
        detector = self._detector()
        seq = SentenceSequence.from_texts(["P.", "The original sentence."], prompt_len=1)

        class Mixed:
            def paraphrase(self, sentence, context, n, prompt):
                return ["The original sentence!", "Completely different words here."]

        spec = AttackSpec(kind="bigram", n_candidates=2, objective="edit")
        out = bigram_attack(spec, seq, detector, Mixed(), embedder16)
        assert out.sequence.texts()[1] == "Completely different words here."


class TestDropAttack:
    def test_p_zero_identity(self):
        seq = ten_sentences()
        out = drop_attack(AttackSpec(kind="drop", p=0.0, rng_seed=1), seq)
        assert out.texts() == seq.texts()

    def test_p_one_invalid(self):
        with pytest.raises(InvalidProbability):
            drop_attack(AttackSpec(kind="drop", p=1.0), ten_sentences())

    def test_frozen_seed_42(self):
        # oracle: default_rng(42).random(9) >= 0.5 retains non-prompt
        # positions [0, 2, 3, 5, 6, 7]
        seq = ten_sentences()
        out = drop_attack(AttackSpec(kind="drop", p=0.5, rng_seed=42), seq)
        expected = [seq.texts()[0]] + [seq.texts()[1 + j] for j in (0, 2, 3, 5, 6, 7)]
        assert out.texts() == expected

    def test_prompt_always_retained(self):
        rng = np.random.default_rng(0)
        seq = ten_sentences()
        for seed in range(30):
            out = drop_attack(AttackSpec(kind="drop", p=0.8, rng_seed=seed), seq)
            assert out.texts()[0] == seq.texts()[0]

    def test_relative_order_preserved(self):
        seq = ten_sentences()
        for seed in range(20):
            out = drop_attack(AttackSpec(kind="drop", p=0.5, rng_seed=seed), seq)
            original_order = {t: i for i, t in enumerate(seq.texts())}
            indices = [original_order[t] for t in out.texts()]
            assert indices == sorted(indices)

    def test_all_dropped_raises_after_resample(self):
        seq = SentenceSequence.from_texts(["P.", "A."], prompt_len=1)
        # p close to 1: both draws almost surely drop the only body sentence
        with pytest.raises(AllDropped):
            for seed in range(50):
                drop_attack(AttackSpec(kind="drop", p=0.999999, rng_seed=seed), seq)

    def test_deterministic(self):
        seq = ten_sentences()
        a = drop_attack(AttackSpec(kind="drop", p=0.4, rng_seed=7), seq)
        b = drop_attack(AttackSpec(kind="drop", p=0.4, rng_seed=7), seq)
        assert a.texts() == b.texts()


class TestMergeAttack:
    def test_p_zero_identity(self):
        text = "First point. Second point! Third? Fourth."
        assert merge_attack(AttackSpec(kind="merge", p=0.0, rng_seed=1), text) == text

    def test_single_boundary_example(self):
        # seed chosen so the (single) boundary fires at p = 0.49
        assert merge_attack(AttackSpec(kind="merge", p=0.49, rng_seed=2), "A. B.") == "A and b."

    def test_p_too_large(self):
        with pytest.raises(InvalidProbability):
            merge_attack(AttackSpec(kind="merge", p=0.6), "A. B.")

    def test_lowercasing_only_on_uppercase(self):
        out = merge_attack(AttackSpec(kind="merge", p=0.49, rng_seed=2), "A. and more.")
        assert out == "A and and more."

    def test_final_terminal_never_replaced(self):
        text = "One. Two."
        for seed in range(40):
            out = merge_attack(AttackSpec(kind="merge", p=0.49, rng_seed=seed), text)
            assert out.endswith(".")

    def test_deterministic(self):
        text = "Alpha one. Beta two. Gamma three. Delta four."
        a = merge_attack(AttackSpec(kind="merge", p=0.45, rng_seed=3), text)
        b = merge_attack(AttackSpec(kind="merge", p=0.45, rng_seed=3), text)
        assert a == b

    def test_merges_reduce_sentence_count(self):
        text = "Alpha one. Beta two. Gamma three. Delta four. Epsilon five."
        out = merge_attack(AttackSpec(kind="merge", p=0.49, rng_seed=5), text)
        n_before = len(split_sentences(text))
        n_after = len(split_sentences(out))
        fired = out.count(" and ") - text.count(" and ")
        assert n_after == n_before - fired


class TestHttpParaphraser:
    def test_wire_protocol(self):
        def handler(method, path, payload):
            if path == "/v1/paraphrase":
                return 200, {"candidates": [payload["sentence"] + " (alt)"] * payload["n"]}
            return 404, {}

        with http_endpoint(handler) as (url, log):
            para = HttpParaphraser(url, backoff_base_s=0.01)
            out = para.paraphrase("The sentence.", "Some context.", 2, "prompt body")
            assert out == ["The sentence. (alt)", "The sentence. (alt)"]
            body = log[0]["payload"]
            assert body["sentence"] == "The sentence."
            assert body["context"] == "Some context."
            assert body["n"] == 2
            assert body["prompt"] == "prompt body"


class TestComposedAttack:
    def test_paraphrase_then_drop(self, embedder16):
        seq = ten_sentences()
        spec = AttackSpec(
            kind="composed",
            stages=[
                AttackSpec(kind="paraphrase"),
                AttackSpec(kind="drop", p=0.3, rng_seed=11),
            ],
        )
        out = apply_attack(spec, seq, paraphraser=ScrambleParaphraser(seed=2))
        direct = drop_attack(
            AttackSpec(kind="drop", p=0.3, rng_seed=11),
            paraphrase_document(AttackSpec(kind="paraphrase"), seq,
                                ScrambleParaphraser(seed=2)).sequence,
        )
        assert out.texts() == direct.texts()

    def test_composed_requires_stages(self):
        with pytest.raises(ValidationError):
            AttackSpec(kind="composed")
