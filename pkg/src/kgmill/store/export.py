"""Canonical logical export of the store's domain content.

The export covers everything the pipeline produces deterministically
(terminologies, code sets, runs, triples, vectors, expansions, beceptivity
values, match results, custom tables) and deliberately excludes wall-clock
timestamps and service bookkeeping (jobs, annotations). Two stores built by
identical operation sequences therefore export byte-identical documents.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from kgmill.store.repository import Store


def export_logical(store: Store) -> str:
    doc = {
        "terminologies": [
            {"name": name} for _, name in store.list_terminologies()
        ],
        "codes": _codes(store),
        "code_sets": _code_sets(store),
        "runs": _runs(store),
        "triples": _triples(store),
        "refinements": _refinements(store),
        "vectors": _vectors(store),
        "expansions": _expansions(store),
        "beceptivity": _beceptivity(store),
        "match_results": _matches(store),
        "custom_tables": _custom_tables(store),
    }
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def export_hash(store: Store) -> str:
    return hashlib.sha256(export_logical(store).encode("utf-8")).hexdigest()


def _codes(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT t.name, c.code_id, s.text, s.source_rank
           FROM term_strings s
           JOIN codes c ON c.id = s.code_pk
           JOIN terminologies t ON t.id = c.terminology_id
           ORDER BY t.name, c.code_id, s.source_rank, s.text"""
    )
    grouped: dict[tuple[str, str], list[dict]] = {}
    for term, code_id, text, rank in rows:
        grouped.setdefault((term, code_id), []).append({"text": text, "rank": rank})
    return [
        {"terminology": term, "code_id": code_id, "strings": strings}
        for (term, code_id), strings in sorted(grouped.items())
    ]


def _code_sets(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT cs.name, t.name, cs.source_filter, cs.expansion_style,
                  cs.warning, cs.version
           FROM code_sets cs JOIN terminologies t ON t.id = cs.terminology_id
           ORDER BY cs.name"""
    )
    out = []
    for name, term, source_filter, style, warning, version in rows:
        members = store.read_rows(
            """SELECT c.code_id FROM code_set_members m
               JOIN codes c ON c.id = m.code_pk
               JOIN code_sets cs ON cs.id = m.code_set_id
               WHERE cs.name=? ORDER BY c.code_id""",
            (name,),
        )
        out.append(
            {
                "name": name,
                "terminology": term,
                "source_filter": source_filter,
                "expansion_style": style,
                "warning": bool(warning),
                "version": version,
                "members": [m[0] for m in members],
            }
        )
    return out


def _runs(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT r.id, cs.name, r.spec_ids, r.status, r.prompt_tokens,
                  r.completion_tokens, r.accumulated_cost
           FROM runs r JOIN code_sets cs ON cs.id = r.code_set_id
           ORDER BY r.id"""
    )
    return [
        {
            "run": rid,
            "code_set": cs_name,
            "spec_ids": json.loads(spec_ids),
            "status": status,
            "prompt_tokens": pt,
            "completion_tokens": ct,
            "accumulated_cost": cost,
        }
        for rid, cs_name, spec_ids, status, pt, ct, cost in rows
    ]


def _triples(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT run_id, subject_code_id, predicate, object_value, object_kind,
                  finalization, replaced_parent
           FROM triples
           ORDER BY run_id, subject_code_id, predicate, object_value"""
    )
    return [
        {
            "run": r[0], "subject": r[1], "predicate": r[2], "object": r[3],
            "object_kind": r[4], "finalization": r[5], "replaced_parent": r[6],
        }
        for r in rows
    ]


def _refinements(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT run_id, subject_code_id, parent_text, child_text, depth
           FROM refinements
           ORDER BY run_id, subject_code_id, parent_text, child_text, depth"""
    )
    return [
        {"run": r[0], "subject": r[1], "parent": r[2], "child": r[3], "depth": r[4]}
        for r in rows
    ]


def _vectors(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT owner_kind, owner_key, model_id, kind, data FROM vectors
           ORDER BY owner_kind, owner_key, model_id, kind"""
    )
    return [
        {
            "owner_kind": ok, "owner_key": key, "model_id": model, "kind": kind,
            "values": [float(v) for v in np.frombuffer(data, dtype=np.float64)],
        }
        for ok, key, model, kind, data in rows
    ]


def _expansions(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT source_text, style, model_id, generated_texts FROM expansions
           ORDER BY source_text, style, model_id"""
    )
    return [
        {"source_text": s, "style": st, "model_id": m, "generated": json.loads(g)}
        for s, st, m, g in rows
    ]


def _beceptivity(store: Store) -> list[dict]:
    rows = store.read_rows(
        "SELECT text, method, value FROM beceptivity_cache ORDER BY text, method"
    )
    return [{"text": t, "method": m, "value": v} for t, m, v in rows]


def _matches(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT m.fingerprint, m.object_string, cs.name, m.z, m.n, m.ranked, m.best
           FROM match_results m JOIN code_sets cs ON cs.id = m.code_set_id
           ORDER BY m.fingerprint"""
    )
    return [
        {
            "fingerprint": fp, "object_string": obj, "code_set": cs_name,
            "z": z, "n": n, "ranked": json.loads(ranked), "best": best,
        }
        for fp, obj, cs_name, z, n, ranked, best in rows
    ]


def _custom_tables(store: Store) -> list[dict]:
    rows = store.read_rows(
        """SELECT name, version, defining_query, columns, rows FROM custom_tables
           ORDER BY name, version"""
    )
    return [
        {
            "name": name, "version": version, "defining_query": query,
            "columns": json.loads(cols), "rows": json.loads(data),
        }
        for name, version, query, cols, data in rows
    ]
