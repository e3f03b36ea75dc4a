"""Embedding vectors, cosine geometry, and pooling.

Vectors are stored as produced by the embedder (not unit-normalized);
cosine distance divides by the norms explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from kgmill.errors import MixedVectors, ZeroVector


class VectorKind(str, Enum):
    CLS = "CLS"
    MEAN_POOLED = "MEAN_POOLED"
    MAX_POOLED = "MAX_POOLED"
    SUMMARY = "SUMMARY"


# Kinds an embedder produces directly for a single string.
STRING_KINDS = (VectorKind.CLS, VectorKind.MEAN_POOLED, VectorKind.MAX_POOLED)


@dataclass(frozen=True)
class EmbeddingVector:
    """A model-tagged, pooling-tagged numeric vector.

    owner identifies what the vector represents: a string's text, a code key,
    or an expansion-set key, depending on owner_kind at the storage layer.
    """

    values: tuple[float, ...]
    model_id: str
    kind: VectorKind
    owner: str = ""

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise MixedVectors("vector must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            raise MixedVectors("vector components must be finite")
        object.__setattr__(self, "values", tuple(float(v) for v in arr))

    @property
    def dimension(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def cosine_distance(u, v) -> float:
    """1 - (u.v)/(|u||v|); in [0, 2] up to floating-point tolerance."""
    ua = _as_vector(u)
    va = _as_vector(v)
    if ua.shape != va.shape:
        raise MixedVectors(f"dimension mismatch: {ua.shape[0]} vs {va.shape[0]}")
    nu = float(np.linalg.norm(ua))
    nv = float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine distance undefined for a zero vector")
    return 1.0 - float(np.dot(ua, va)) / (nu * nv)


def pool_vectors(vectors: list[EmbeddingVector], mode: str) -> EmbeddingVector:
    """Component-wise mean or max of vectors sharing a model and dimension.

    The result is tagged kind=SUMMARY.
    """
    if not vectors:
        raise MixedVectors("cannot pool an empty vector list")
    if mode not in ("mean", "max"):
        raise ValueError(f"unknown pooling mode: {mode!r}")
    model_ids = {v.model_id for v in vectors}
    if len(model_ids) != 1:
        raise MixedVectors(f"mixed models: {sorted(model_ids)}")
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise MixedVectors(f"mixed dimensions: {sorted(dims)}")
    stack = np.stack([v.as_array() for v in vectors])
    pooled = stack.mean(axis=0) if mode == "mean" else stack.max(axis=0)
    return EmbeddingVector(
        values=tuple(float(x) for x in pooled),
        model_id=vectors[0].model_id,
        kind=VectorKind.SUMMARY,
        owner=vectors[0].owner,
    )


@dataclass(frozen=True)
class VectorSelection:
    """Which vector kinds participate on each side of a match comparison."""

    subject_kinds: frozenset[VectorKind] = field(
        default_factory=lambda: frozenset({VectorKind.CLS})
    )
    object_kinds: frozenset[VectorKind] = field(
        default_factory=lambda: frozenset({VectorKind.CLS})
    )
    include_expansions: bool = False

    def __post_init__(self):
        object.__setattr__(self, "subject_kinds", frozenset(VectorKind(k) for k in self.subject_kinds))
        object.__setattr__(self, "object_kinds", frozenset(VectorKind(k) for k in self.object_kinds))
        if not self.subject_kinds or not self.object_kinds:
            raise ValueError("subject_kinds and object_kinds must be non-empty")


def _as_vector(v) -> np.ndarray:
    if isinstance(v, EmbeddingVector):
        return v.as_array()
    return np.asarray(v, dtype=np.float64)
