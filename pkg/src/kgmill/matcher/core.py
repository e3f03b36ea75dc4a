"""Exact string-to-code matching by minimum pairwise cosine distance.

The distance between a string x and a code c is the minimum cosine distance
over every selected pair of their vectors; the best code is the argmin over
the code set, subject to a strict distance ceiling z. Search is exhaustive
(no approximate index): candidates are scanned in full through the grouped
kernel, and the top-n codes under z are persisted per query fingerprint so
identical queries never recompute.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kgmill.embeddings.service import (
    OWNER_CODE,
    OWNER_EXPANSION,
    OWNER_STRING,
    EmbeddingService,
    code_owner_key,
    expansion_owner_key,
)
from kgmill.embeddings.vectors import STRING_KINDS, VectorKind, VectorSelection
from kgmill.errors import DependencyMissing, EmptySet, ZeroVector
from kgmill.matcher._kernels import KERNEL_BACKEND, group_min_cosine
from kgmill.store.models import Code, ObjectKind
from kgmill.store.repository import Store

DEFAULT_TOP_N = 4  # top matches persisted unless overridden


@dataclass(frozen=True)
class MatchQuery:
    x: str
    code_set_id: int
    selection: VectorSelection = field(default_factory=VectorSelection)
    z: float = 2.0
    n: int = DEFAULT_TOP_N

    def __post_init__(self):
        if not 0.0 <= self.z <= 2.0:
            raise ValueError(f"z must be in [0, 2], got {self.z}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


@dataclass
class MatchResult:
    ranked: list[tuple[str, float]]
    best: str | None
    query_fingerprint: str

    def __post_init__(self):
        if self.ranked:
            assert self.best == self.ranked[0][0]


class Matcher:
    """Read-only over vectors; results funnel into the store's match table."""

    def __init__(self, store: Store, embedding: EmbeddingService):
        self.store = store
        self.embedding = embedding
        self.kernel_calls = 0
        self.pairs_scanned = 0

    @property
    def model_id(self) -> str:
        return self.embedding.embedder.model_id

    def fingerprint(self, query: MatchQuery) -> str:
        code_set = self.store.get_code_set(query.code_set_id)
        doc = {
            "x": query.x,
            "object_kinds": sorted(k.value for k in query.selection.object_kinds),
            "subject_kinds": sorted(k.value for k in query.selection.subject_kinds),
            "include_expansions": query.selection.include_expansions,
            "z": repr(query.z),
            "n": query.n,
            "code_set": code_set.id,
            "code_set_version": code_set.version,
            "model": self.model_id,
        }
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode("utf-8")
        ).hexdigest()

    def match_string_to_codes(self, query: MatchQuery) -> MatchResult:
        fingerprint = self.fingerprint(query)
        cached = self.store.get_match(fingerprint)
        if cached is not None:
            return MatchResult(
                ranked=[(c, d) for c, d in cached["ranked"]],
                best=cached["best"],
                query_fingerprint=fingerprint,
            )

        codes = self.store.code_set_codes(query.code_set_id)
        if not codes:
            raise EmptySet(f"code set {query.code_set_id} has no members")

        query_vectors = self._string_vectors(
            query.x, query.selection.object_kinds,
            query.selection.include_expansions, compute_missing=True,
        )
        if not query_vectors:
            raise DependencyMissing(f"no vectors for query string {query.x!r}")

        blocks: list[np.ndarray] = []
        offsets = [0]
        code_ids: list[str] = []
        for code in codes:
            vectors = self._code_vectors(code, query.selection)
            if not vectors:
                raise DependencyMissing(
                    f"code {code.code_id}: no vectors for the selected kinds"
                )
            blocks.extend(vectors)
            offsets.append(offsets[-1] + len(vectors))
            code_ids.append(code.code_id)

        queries = np.vstack(query_vectors)
        candidates = np.vstack(blocks)
        if not np.linalg.norm(queries, axis=1).all():
            raise ZeroVector(f"query string {query.x!r} has a zero vector")
        if not np.linalg.norm(candidates, axis=1).all():
            raise ZeroVector("a code vector has zero norm")

        distances = group_min_cosine(
            queries, candidates, np.asarray(offsets, dtype=np.int64)
        )
        self.kernel_calls += 1
        self.pairs_scanned += queries.shape[0] * candidates.shape[0]

        survivors = [
            (code_ids[i], float(distances[i]))
            for i in range(len(code_ids))
            if distances[i] < query.z
        ]
        survivors.sort(key=lambda pair: (pair[1], pair[0]))
        ranked = survivors[: query.n]
        best = ranked[0][0] if ranked else None
        self.store.put_match(
            fingerprint, query.x, query.code_set_id, query.z, query.n, ranked, best
        )
        return MatchResult(ranked=ranked, best=best, query_fingerprint=fingerprint)

    def batch_match(
        self,
        run_id: int,
        code_set_id: int | None = None,
        selection: VectorSelection | None = None,
        z: float = 2.0,
        n: int = DEFAULT_TOP_N,
    ) -> dict[str, MatchResult]:
        """Match every distinct free-text object string of a run."""
        run = self.store.get_run(run_id)
        code_set_id = code_set_id if code_set_id is not None else run.code_set_id
        selection = selection or VectorSelection()
        strings = sorted(
            {
                t.object_value
                for t in self.store.triples_for_run(run_id)
                if t.object_kind is ObjectKind.FREE_TEXT
            }
        )
        return {
            s: self.match_string_to_codes(
                MatchQuery(x=s, code_set_id=code_set_id, selection=selection, z=z, n=n)
            )
            for s in strings
        }

    # -- vector gathering ----------------------------------------------------

    def _string_vectors(
        self, text: str, kinds: frozenset[VectorKind], include_expansions: bool,
        compute_missing: bool,
    ) -> list[np.ndarray]:
        base_kinds = [k for k in STRING_KINDS if k in kinds]
        stored = self.store.vectors_for_owner(OWNER_STRING, text, self.model_id)
        if compute_missing and base_kinds and not all(
            k.value in stored for k in base_kinds
        ):
            self.embedding.embed_string(text)
            stored = self.store.vectors_for_owner(OWNER_STRING, text, self.model_id)
        vectors = [stored[k.value] for k in base_kinds if k.value in stored]

        # Expansion-derived vectors: the generated texts' vectors when
        # expansions are included, plus the per-style summary vector when
        # either expansions are included or SUMMARY is selected.
        want_summaries = include_expansions or VectorKind.SUMMARY in kinds
        if include_expansions or want_summaries:
            for style, generated in self._expansions_of(text):
                if include_expansions:
                    for gen_text in generated:
                        gen_stored = self.store.vectors_for_owner(
                            OWNER_STRING, gen_text, self.model_id
                        )
                        vectors += [
                            gen_stored[k.value] for k in base_kinds
                            if k.value in gen_stored
                        ]
                if want_summaries:
                    summary = self.store.get_vector(
                        OWNER_EXPANSION, expansion_owner_key(text, style),
                        self.model_id, VectorKind.SUMMARY.value,
                    )
                    if summary is not None:
                        vectors.append(summary)
        return vectors

    def _code_vectors(self, code: Code, selection: VectorSelection) -> list[np.ndarray]:
        kinds = selection.subject_kinds
        vectors: list[np.ndarray] = []
        for s in code.strings:
            vectors += self._string_vectors(
                s.text, kinds, selection.include_expansions, compute_missing=False
            )
        if VectorKind.SUMMARY in kinds:
            summary = self.store.get_vector(
                OWNER_CODE, code_owner_key(code.terminology_id, code.code_id),
                self.model_id, VectorKind.SUMMARY.value,
            )
            if summary is not None:
                vectors.append(summary)
        return vectors

    def _expansions_of(self, text: str) -> list[tuple[str, list[str]]]:
        rows = self.store.read_rows(
            """SELECT style, generated_texts FROM expansions
               WHERE source_text=? AND model_id=? ORDER BY style""",
            (text, self.model_id),
        )
        return [(style, json.loads(generated)) for style, generated in rows]


def write_match_review(store: Store, path: str | Path, delimiter: str = "\t") -> int:
    """Export stored matches: object string, rank, code_id, main subject
    string, distance. Returns the number of lines written."""
    lines = []
    main_strings = {
        code_id: text
        for code_id, text in store.read_rows(
            """SELECT c.code_id, s.text FROM codes c
               JOIN term_strings s ON s.code_pk = c.id
               WHERE s.source_rank = (
                   SELECT MIN(source_rank) FROM term_strings WHERE code_pk = c.id
               )"""
        )
    }
    for match in store.all_matches():
        for rank, (code_id, distance) in enumerate(match["ranked"], 1):
            lines.append(
                delimiter.join(
                    [
                        match["object_string"],
                        str(rank),
                        code_id,
                        main_strings.get(code_id, ""),
                        repr(distance),
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return len(lines)
