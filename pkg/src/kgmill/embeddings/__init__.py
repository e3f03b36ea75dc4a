from kgmill.embeddings.vectors import (
    EmbeddingVector,
    VectorKind,
    VectorSelection,
    cosine_distance,
    pool_vectors,
)
from kgmill.embeddings.embedder import Embedder, FixtureEmbedder
from kgmill.embeddings.service import EmbeddingService

__all__ = [
    "EmbeddingVector", "VectorKind", "VectorSelection", "cosine_distance",
    "pool_vectors", "Embedder", "FixtureEmbedder", "EmbeddingService",
]
