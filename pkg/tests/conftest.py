import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from simmark.embedding import CachedEmbedder, SyntheticEmbedder


@pytest.fixture
def embedder16():
    return CachedEmbedder(SyntheticEmbedder(seed=7, dim=16))


@pytest.fixture
def corpus_path():
    return os.path.join(os.path.dirname(__file__), "data", "segmentation_corpus.json")
