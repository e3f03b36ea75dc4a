"""Store-backed embedding generation with an at-most-once cache.

Each (owner, model, kind) vector is computed once and persisted; repeat
requests are served from the store without touching the embedder. Concurrent
writers racing on the same key both observe the first stored vector.
"""

from __future__ import annotations

import numpy as np

from kgmill.embeddings.embedder import Embedder
from kgmill.embeddings.vectors import (
    STRING_KINDS,
    EmbeddingVector,
    VectorKind,
    pool_vectors,
)
from kgmill.errors import DependencyMissing, EmbedError
from kgmill.store.models import Code, Terminology
from kgmill.store.repository import Store

OWNER_STRING = "string"
OWNER_CODE = "code"
OWNER_EXPANSION = "expansion_set"


def code_owner_key(terminology_id: int, code_id: str) -> str:
    return f"{terminology_id}:{code_id}"


def expansion_owner_key(source_text: str, style: str) -> str:
    return f"{style}|{source_text}"


class EmbeddingService:
    def __init__(self, store: Store, embedder: Embedder):
        self.store = store
        self.embedder = embedder

    def embed_string(self, text: str) -> dict[VectorKind, np.ndarray]:
        """CLS, MEAN_POOLED, and MAX_POOLED vectors for text, cached forever."""
        if not text:
            raise EmbedError("cannot embed empty text")
        model = self.embedder.model_id
        cached = self.store.vectors_for_owner(OWNER_STRING, text, model)
        if all(kind.value in cached for kind in STRING_KINDS):
            return {kind: cached[kind.value] for kind in STRING_KINDS}

        try:
            produced = self.embedder.embed(text)
        except EmbedError:
            raise
        except Exception as exc:
            raise EmbedError(f"embedder failed for {text!r}: {exc}") from exc

        out: dict[VectorKind, np.ndarray] = {}
        for kind in STRING_KINDS:
            vec = np.asarray(produced[kind], dtype=np.float64)
            if vec.shape != (self.embedder.dimension,):
                raise EmbedError(
                    f"embedder returned length {vec.size} for declared d={self.embedder.dimension}"
                )
            if not np.all(np.isfinite(vec)):
                raise EmbedError(f"non-finite components for {text!r}")
            out[kind] = self.store.put_vector(OWNER_STRING, text, model, kind.value, vec)
        return out

    def code_summary_vector(self, code: Code) -> np.ndarray:
        """Mean-pooled CLS vectors of all the code's strings, persisted once."""
        model = self.embedder.model_id
        key = code_owner_key(code.terminology_id, code.code_id)
        cached = self.store.get_vector(OWNER_CODE, key, model, VectorKind.SUMMARY.value)
        if cached is not None:
            return cached
        cls_vectors = []
        for s in code.strings:
            vec = self.store.get_vector(OWNER_STRING, s.text, model, VectorKind.CLS.value)
            if vec is None:
                raise DependencyMissing(
                    f"code {code.code_id}: no CLS vector for {s.text!r}"
                )
            cls_vectors.append(
                EmbeddingVector(tuple(vec), model, VectorKind.CLS, owner=s.text)
            )
        pooled = pool_vectors(cls_vectors, "mean")
        return self.store.put_vector(
            OWNER_CODE, key, model, VectorKind.SUMMARY.value, pooled.values
        )

    def expansion_summary_vector(
        self, source_text: str, style: str, generated_texts: list[str]
    ) -> np.ndarray:
        """Embed each generated text and persist the mean-pooled CLS summary."""
        model = self.embedder.model_id
        key = expansion_owner_key(source_text, style)
        cached = self.store.get_vector(OWNER_EXPANSION, key, model, VectorKind.SUMMARY.value)
        if cached is not None:
            return cached
        cls_vectors = []
        for text in generated_texts:
            vectors = self.embed_string(text)
            cls_vectors.append(
                EmbeddingVector(tuple(vectors[VectorKind.CLS]), model, VectorKind.CLS, owner=text)
            )
        pooled = pool_vectors(cls_vectors, "mean")
        return self.store.put_vector(
            OWNER_EXPANSION, key, model, VectorKind.SUMMARY.value, pooled.values
        )

    def index_terminology(self, terminology: Terminology) -> int:
        """Embed every distinct string once, then build code summary vectors.

        Returns the number of distinct strings indexed.
        """
        texts = self.store.distinct_strings(terminology.id)
        for text in texts:
            self.embed_string(text)
        for code in terminology.codes:
            self.code_summary_vector(code)
        return len(texts)
