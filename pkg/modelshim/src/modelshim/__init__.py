"""modelshim: optional sidecar serving models behind three HTTP wire protocols.

POST /v1/embed      {"model", "instruction", "texts"}            -> {"vectors"}
POST /v1/generate   {"model", "prompt", sampling params, "n"}    -> {"completions"}
POST /v1/paraphrase {"sentence", "context", "n"[, "prompt"]}     -> {"candidates"}
GET  /v1/health                                                  -> loaded models

Offline backends (hash embeddings, toy generator/paraphraser) keep the shim
fully functional with no downloaded weights; neural backends load lazily when
transformers / sentence-transformers and the weights are available.
"""

__version__ = "0.1.0"

from .backends import (
    HashEmbedBackend,
    IdentityParaphraseBackend,
    ToyGenerateBackend,
    ToyParaphraseBackend,
    build_embed_backend,
    build_generate_backend,
    build_paraphrase_backend,
)
from .config import ShimConfig
from .server import make_server, serve
