"""Declarative membership filters for code-set creation.

Filters are plain JSON-able dicts so a code set's defining filter can be
persisted and replayed. Supported leaf forms:

    {"field": "code_id", "op": "prefix", "value": "D"}
    {"field": "code_id", "op": "eq",     "value": "C001"}
    {"field": "code_id", "op": "in",     "values": ["C001", "C002"]}
    {"field": "string",  "op": "prefix" | "eq" | "in", ...}

A "string" field matches a code when any of its strings matches. Composite
forms: {"op": "and"|"or", "clauses": [...]}, {"op": "not", "clause": ...},
and {"op": "all"} which matches every code.
"""

from __future__ import annotations

import json

from kgmill.store.models import Code

_LEAF_OPS = {"prefix", "eq", "in"}
_FIELDS = {"code_id", "string"}


def validate_filter(spec: dict) -> None:
    if not isinstance(spec, dict):
        raise ValueError("filter must be a dict")
    op = spec.get("op")
    if op == "all":
        return
    if op in ("and", "or"):
        clauses = spec.get("clauses")
        if not isinstance(clauses, list) or not clauses:
            raise ValueError(f"{op!r} filter needs a non-empty 'clauses' list")
        for clause in clauses:
            validate_filter(clause)
        return
    if op == "not":
        validate_filter(spec.get("clause") or {})
        return
    if op not in _LEAF_OPS:
        raise ValueError(f"unknown filter op: {op!r}")
    if spec.get("field") not in _FIELDS:
        raise ValueError(f"unknown filter field: {spec.get('field')!r}")
    if op == "in":
        if not isinstance(spec.get("values"), list):
            raise ValueError("'in' filter needs a 'values' list")
    elif not isinstance(spec.get("value"), str):
        raise ValueError(f"{op!r} filter needs a string 'value'")


def matches(spec: dict, code: Code) -> bool:
    op = spec["op"]
    if op == "all":
        return True
    if op == "and":
        return all(matches(c, code) for c in spec["clauses"])
    if op == "or":
        return any(matches(c, code) for c in spec["clauses"])
    if op == "not":
        return not matches(spec["clause"], code)

    if spec["field"] == "code_id":
        candidates = [code.code_id]
    else:
        candidates = [s.text for s in code.strings]

    if op == "prefix":
        return any(c.startswith(spec["value"]) for c in candidates)
    if op == "eq":
        return any(c == spec["value"] for c in candidates)
    return any(c in spec["values"] for c in candidates)


def canonical_filter_text(spec: dict) -> str:
    """Stable serialized form stored as the code set's source_filter."""
    validate_filter(spec)
    return json.dumps(spec, sort_keys=True, separators=(",", ":"))


def parse_filter_text(text: str) -> dict:
    spec = json.loads(text)
    validate_filter(spec)
    return spec
