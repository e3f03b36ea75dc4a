"""Embedder contract and the deterministic fixture embedder.

Any object with a model_id, a declared dimension, and an embed(text) method
returning CLS / MEAN_POOLED / MAX_POOLED vectors can back the system. The
fixture embedder keeps everything offline: vectors come from a lookup file
when present, otherwise from hashing the text into R^d, so identical text
always yields identical vectors.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol, runtime_checkable

from kgmill.errors import EmbedError
from kgmill.embeddings.vectors import STRING_KINDS, VectorKind


@runtime_checkable
class Embedder(Protocol):
    """Deterministic text-to-vectors contract."""

    model_id: str
    dimension: int

    def embed(self, text: str) -> dict[VectorKind, list[float]]:
        """Return one vector per string kind (CLS, MEAN_POOLED, MAX_POOLED)."""
        ...


class FixtureEmbedder:
    """Lookup-file embedder with a seeded-hash fallback.

    Lookup file format, one record per line, tab-separated:
        text <TAB> model_id <TAB> kind <TAB> comma-separated components

    Strings absent from the file fall back to hashing: shake_256 of
    "model|kind|text" expanded to 8 bytes per component, each mapped
    into [-1, 1). The fallback depends only on the inputs, never on
    process state, so vectors are reproducible across runs and machines.
    """

    def __init__(self, model_id: str = "fixture-16", dimension: int = 16,
                 lookup_path: str | Path | None = None):
        self.model_id = model_id
        self.dimension = dimension
        self.calls = 0  # embed() invocations, for cache-contract tests
        self._lookup: dict[tuple[str, VectorKind], list[float]] = {}
        if lookup_path is not None:
            self._load_lookup(Path(lookup_path))

    def _load_lookup(self, path: Path) -> None:
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise EmbedError(f"{path}:{lineno}: expected 4 tab-separated fields")
            text, model_id, kind, components = parts
            if model_id != self.model_id:
                continue
            values = [float(c) for c in components.split(",")]
            if len(values) != self.dimension:
                raise EmbedError(
                    f"{path}:{lineno}: got {len(values)} components, declared d={self.dimension}"
                )
            self._lookup[(text, VectorKind(kind))] = values

    def embed(self, text: str) -> dict[VectorKind, list[float]]:
        self.calls += 1
        out = {}
        for kind in STRING_KINDS:
            hit = self._lookup.get((text, kind))
            out[kind] = list(hit) if hit is not None else self._hash_vector(text, kind)
        return out

    def _hash_vector(self, text: str, kind: VectorKind) -> list[float]:
        digest = hashlib.shake_256(
            f"{self.model_id}|{kind.value}|{text}".encode("utf-8")
        ).digest(8 * self.dimension)
        values = []
        for i in range(self.dimension):
            word = int.from_bytes(digest[8 * i : 8 * i + 8], "big")
            values.append(word / 2**63 - 1.0)
        return values
