from __future__ import annotations

import pytest

from kgmill.embeddings import EmbeddingService, FixtureEmbedder
from kgmill.store import Store


@pytest.fixture()
def store(tmp_path):
    s = Store(tmp_path / "kgmill.db")
    yield s
    s.close()


@pytest.fixture()
def embedder():
    return FixtureEmbedder(model_id="fixture-8", dimension=8)


@pytest.fixture()
def embedding(store, embedder):
    return EmbeddingService(store, embedder)


@pytest.fixture()
def mini_terminology(store):
    """Three-code terminology used across store and matcher tests."""
    rows = [
        ("D1", "myocardial infarction", 0),
        ("D1", "heart attack", 1),
        ("D2", "urinary tract infection", 0),
        ("M1", "nitrofurantoin", 0),
    ]
    return store.import_terminology("mini", rows)
