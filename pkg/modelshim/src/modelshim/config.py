"""Shim configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class ShimConfig:
    """Which backends to load and how to serve them.

    Backend specs are strings: embeddings "hash" or "st:<model_id>";
    generation "toy" or "hf:<model_id>"; paraphrase "toy", "identity" or
    "hf:<model_id>". An empty string disables that capability; at least one
    must stay enabled.
    """

    embed_model_id: str = "hash"
    gen_model_id: str = "toy"
    para_model_id: str = "toy"
    device: str = "cpu"
    bind_addr: str = "127.0.0.1:8707"
    max_batch: int = 32
    max_concurrent: int = 4
    embed_dim: int = 768

    def __post_init__(self):
        if not (self.embed_model_id or self.gen_model_id or self.para_model_id):
            raise ValueError("at least one of the three models must be enabled")
        if self.max_batch < 1 or self.max_concurrent < 1:
            raise ValueError("max_batch and max_concurrent must be >= 1")
