"""Model backends: offline stand-ins plus lazy neural wiring.

The offline backends are deterministic and dependency-light so the shim can
serve the full wire surface on any machine; the neural backends require the
optional [models] extra and locally available weights.
"""

from __future__ import annotations

import hashlib
import itertools

import numpy as np

_LEXICON = [
    "harbor", "lantern", "meadow", "quartz", "ripple", "saffron", "timber",
    "velvet", "willow", "zephyr", "amber", "birch", "cinder", "drift",
    "ember", "fjord", "glade", "hollow", "iris", "juniper", "kestrel",
    "lichen", "marble", "nectar", "onyx", "pebble", "quill", "reed",
]


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

class HashEmbedBackend:
    """Deterministic unit vectors from a keyed hash of instruction + text.

    The instruction is prepended to the text before hashing, mirroring how
    instruction-tuned embedders condition on it: same text under different
    instructions lands in different regions.
    """

    def __init__(self, dim: int = 768, seed: int = 0):
        self.model_id = f"hash-{dim}"
        self.dim = dim
        self.seed = seed

    def embed(self, instruction: str, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            payload = (instruction + "\x1f" + text).encode("utf-8")
            digest = hashlib.blake2b(payload, digest_size=16,
                                     key=str(self.seed).encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            v = rng.standard_normal(self.dim)
            out[i] = v / np.linalg.norm(v)
        return out


class SentenceTransformerBackend:
    """Instruction-aware neural embedder (requires sentence-transformers)."""

    def __init__(self, model_id: str, device: str = "cpu", dim: int = 768):
        from sentence_transformers import SentenceTransformer

        self.model_id = model_id
        self.dim = dim
        self._model = SentenceTransformer(model_id, device=device)
        self._instructor_style = "instructor" in model_id.lower()

    def embed(self, instruction: str, texts: list[str]) -> np.ndarray:
        if self._instructor_style:
            payload = [[instruction, t] for t in texts]
        else:
            payload = [f"{instruction} {t}".strip() for t in texts]
        vectors = self._model.encode(payload, convert_to_numpy=True)
        return np.asarray(vectors, dtype=np.float64)


def build_embed_backend(spec: str, device: str = "cpu", dim: int = 768):
    if not spec:
        return None
    if spec == "hash":
        return HashEmbedBackend(dim=dim)
    if spec.startswith("st:"):
        return SentenceTransformerBackend(spec[3:], device=device, dim=dim)
    raise ValueError(f"unknown embed backend spec {spec!r}")


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

class ToyGenerateBackend:
    """Pseudo-text sampler honoring the requested token bounds.

    Tokens are whitespace words. temperature <= 0 decodes greedily (fully
    deterministic for a given prompt); otherwise sampling is seeded by the
    optional per-request seed for reproducibility.
    """

    def __init__(self, seed: int = 0):
        self.model_id = "toy"
        self.seed = seed
        self._fresh = itertools.count()

    def _tokens(self, rng: np.random.Generator | None, prompt: str, count: int) -> list[str]:
        words = []
        if rng is None:  # greedy: walk the lexicon from a prompt-derived offset
            offset = int(hashlib.blake2b(prompt.encode(), digest_size=4).hexdigest(), 16)
            for i in range(count):
                words.append(_LEXICON[(offset + i) % len(_LEXICON)])
        else:
            idx = rng.integers(0, len(_LEXICON), size=count)
            words = [_LEXICON[i] for i in idx]
        return words

    def generate(self, prompt: str, temperature: float, repetition_penalty: float,
                 min_new_tokens: int, max_new_tokens: int, n: int,
                 seed: int | None = None) -> list[str]:
        completions = []
        greedy = temperature <= 0.0
        for i in range(n):
            if greedy:
                rng = None
                count = min_new_tokens
            else:
                request_seed = seed if seed is not None else self.seed + next(self._fresh)
                rng = np.random.default_rng((request_seed, i))
                count = int(rng.integers(min_new_tokens, max_new_tokens + 1))
            words = self._tokens(rng, prompt, count)
            # punctuate every ~9 words so the output segments into sentences
            for j in range(8, len(words), 9):
                words[j] = words[j] + "."
            text = " ".join(words)
            if not text.endswith("."):
                text += "."
            completions.append(text)
        return completions


class HfGenerateBackend:
    """Causal-LM generation via transformers (requires [models] extra)."""

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.model_id = model_id
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForCausalLM.from_pretrained(model_id).to(device)
        self._device = device

    def generate(self, prompt, temperature, repetition_penalty, min_new_tokens,
                 max_new_tokens, n, seed=None):
        torch = self._torch
        if seed is not None:
            torch.manual_seed(seed)
        inputs = self._tokenizer(prompt, return_tensors="pt").to(self._device)
        prompt_len = inputs["input_ids"].shape[1]
        do_sample = temperature > 0.0
        out = self._model.generate(
            **inputs,
            do_sample=do_sample,
            temperature=temperature if do_sample else None,
            repetition_penalty=repetition_penalty,
            min_new_tokens=min_new_tokens,
            max_new_tokens=max_new_tokens,
            num_return_sequences=n,
            pad_token_id=self._tokenizer.eos_token_id,
        )
        return [
            self._tokenizer.decode(seq[prompt_len:], skip_special_tokens=True)
            for seq in out
        ]


def build_generate_backend(spec: str, device: str = "cpu"):
    if not spec:
        return None
    if spec == "toy":
        return ToyGenerateBackend()
    if spec.startswith("hf:"):
        return HfGenerateBackend(spec[3:], device=device)
    raise ValueError(f"unknown generate backend spec {spec!r}")


# ---------------------------------------------------------------------------
# paraphrase
# ---------------------------------------------------------------------------

class IdentityParaphraseBackend:
    """Test mode: every candidate equals the input sentence."""

    model_id = "identity"

    def paraphrase(self, sentence: str, context: str, n: int,
                   seed: int | None = None) -> list[str]:
        return [sentence] * n


class ToyParaphraseBackend:
    """Deterministic surface rewrites: n distinct candidates per sentence."""

    model_id = "toy"

    _SWAPS = [
        ("the", "that"), ("a", "one"), ("is", "was"), ("and", "plus"),
        ("into", "inside"), ("near", "beside"),
    ]

    def paraphrase(self, sentence: str, context: str, n: int,
                   seed: int | None = None) -> list[str]:
        candidates = []
        stem = sentence.rstrip(".!?")
        tail = sentence[len(stem):] or "."
        for i in range(n):
            words = stem.split()
            rotated = words[i % max(1, len(words)):] + words[: i % max(1, len(words))]
            out = " ".join(rotated)
            for j, (a, b) in enumerate(self._SWAPS):
                if (i + j) % 2 == 0:
                    out = out.replace(f" {a} ", f" {b} ")
            candidates.append((out + tail) if out else sentence)
        return candidates


class HfParaphraseBackend:
    """Seq2seq paraphraser via transformers (requires [models] extra)."""

    def __init__(self, model_id: str, device: str = "cpu"):
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self.model_id = model_id
        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device)
        self._device = device

    def paraphrase(self, sentence, context, n, seed=None):
        inputs = self._tokenizer(sentence, return_tensors="pt",
                                 truncation=True).to(self._device)
        out = self._model.generate(
            **inputs, num_beams=max(n, 2), num_return_sequences=n, max_new_tokens=96
        )
        return [self._tokenizer.decode(seq, skip_special_tokens=True) for seq in out]


def build_paraphrase_backend(spec: str, device: str = "cpu"):
    if not spec:
        return None
    if spec == "identity":
        return IdentityParaphraseBackend()
    if spec == "toy":
        return ToyParaphraseBackend()
    if spec.startswith("hf:"):
        return HfParaphraseBackend(spec[3:], device=device)
    raise ValueError(f"unknown paraphrase backend spec {spec!r}")
