"""Parsing of provider responses into per-element values.

Two wire shapes exist: a JSON object for providers with structured output,
and the documented delimited fallback (bare payload for single-element
schemas, 'name: content' lines otherwise, pipe-delimited multi-response
content, ' :: ' separating a value from its requested beceptivity rating).

With strict=True the first element-level failure raises (ParseError,
KeyUnmapped, ...); with strict=False failures are recorded per element so a
run can drop one bad element while keeping its siblings.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from kgmill.errors import KeyUnmapped, KgmillError, ParseError
from kgmill.llm.providers import Capabilities
from kgmill.llm.schema import ResponseDictionary, ResponseSchema, SchemaElement, ValueKind

_FENCE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)
_BECEPTIVITY_SEP = "::"


@dataclass
class ParsedItem:
    value: str | float | int
    beceptivity: float | None = None


@dataclass
class ParsedElement:
    name: str
    items: list[ParsedItem] = field(default_factory=list)
    multi: bool = False
    no_write: bool = False
    error: KgmillError | None = None

    @property
    def value(self):
        """Persistable view: a list for multi-response elements, else a scalar."""
        if self.multi:
            return [item.value for item in self.items]
        return self.items[0].value if self.items else None


@dataclass
class ParsedResponse:
    elements: dict[str, ParsedElement]
    missing: list[str]
    raw: str

    @property
    def values(self) -> dict:
        """name -> value for elements that parsed cleanly."""
        return {
            name: el.value
            for name, el in self.elements.items()
            if el.error is None and name not in self.missing
        }

    def value(self, name: str):
        return self.elements[name].value


def map_dictionary_response(key, dictionary: ResponseDictionary) -> str:
    """Translate a short dictionary key back to its categorical value."""
    mapped = dictionary.lookup(str(key).strip())
    if mapped is None:
        raise KeyUnmapped(str(key))
    return mapped


def parse_response(
    raw: str,
    schema: ResponseSchema,
    capabilities: Capabilities | None = None,
    strict: bool = True,
) -> ParsedResponse:
    if not raw or not raw.strip():
        raise ParseError("empty response payload", raw=raw)
    capabilities = capabilities or Capabilities()
    if capabilities.structured_output:
        per_element = _split_structured(raw, schema)
    else:
        per_element = _split_delimited(raw, schema)

    elements: dict[str, ParsedElement] = {}
    missing: list[str] = []
    for element in schema.elements:
        if element.name not in per_element:
            missing.append(element.name)
            elements[element.name] = ParsedElement(
                element.name, multi=element.multi_response, no_write=element.no_write
            )
            continue
        parsed = ParsedElement(
            element.name, multi=element.multi_response, no_write=element.no_write
        )
        try:
            parsed.items = _normalize(per_element[element.name], element, raw)
        except KgmillError as exc:
            if strict:
                raise
            parsed.error = exc
        elements[element.name] = parsed
    return ParsedResponse(elements=elements, missing=missing, raw=raw)


# -- structured payloads ----------------------------------------------------


def _split_structured(raw: str, schema: ResponseSchema) -> dict[str, object]:
    text = raw.strip()
    fenced = _FENCE.match(text)
    if fenced:
        text = fenced.group(1).strip()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"response is not valid JSON: {exc}", raw=raw) from exc
    if not isinstance(payload, dict):
        raise ParseError("structured response must be a JSON object", raw=raw)

    out: dict[str, object] = {}
    for element in schema.elements:
        if element.name not in payload:
            continue
        value = payload[element.name]
        if element.beceptivity_requested and not element.multi_response:
            out[element.name] = {"value": value,
                                 "beceptivity": payload.get(element.beceptivity_field)}
        else:
            out[element.name] = value
    return out


# -- delimited payloads -------------------------------------------------------


def _split_delimited(raw: str, schema: ResponseSchema) -> dict[str, object]:
    text = raw.strip()
    if len(schema.elements) == 1:
        return {schema.elements[0].name: text}
    out: dict[str, object] = {}
    names = {e.name for e in schema.elements}
    for line in text.splitlines():
        line = line.strip().lstrip("-").strip()
        if not line or ":" not in line:
            continue
        name, _, content = line.partition(":")
        name = name.strip()
        if name in names:
            out[name] = content.strip()
    return out


# -- normalization ---------------------------------------------------------------


def _normalize(payload, element: SchemaElement, raw: str) -> list[ParsedItem]:
    if element.multi_response:
        items = _as_item_list(payload, element)
    else:
        items = [_as_item(payload, element)]
    return [
        ParsedItem(_coerce_value(item.value, element, raw), item.beceptivity)
        for item in items
    ]


def _as_item_list(payload, element: SchemaElement) -> list[ParsedItem]:
    if isinstance(payload, str):
        parts = [p.strip() for p in payload.split("|") if p.strip()]
        return [_as_item(p, element) for p in parts]
    if isinstance(payload, list):
        return [_as_item(entry, element) for entry in payload]
    return [_as_item(payload, element)]


def _as_item(entry, element: SchemaElement) -> ParsedItem:
    if isinstance(entry, dict):
        return ParsedItem(entry.get("value"), _maybe_number(entry.get("beceptivity")))
    if (element.beceptivity_requested and isinstance(entry, str)
            and _BECEPTIVITY_SEP in entry):
        value, _, rating = entry.rpartition(_BECEPTIVITY_SEP)
        return ParsedItem(value.strip(), _maybe_number(rating.strip()))
    if isinstance(entry, dict) is False and element.beceptivity_requested:
        return ParsedItem(entry, None)
    return ParsedItem(entry)


def _maybe_number(value) -> float | None:
    if value is None:
        return None
    try:
        number = float(value)
    except (TypeError, ValueError):
        return None
    return number if math.isfinite(number) else None


def _coerce_value(value, element: SchemaElement, raw: str):
    if value is None:
        raise ParseError(f"element {element.name!r} has no value", raw=raw)
    if element.dictionary is not None:
        return map_dictionary_response(value, element.dictionary)
    if element.value_kind is ValueKind.NUMERIC:
        try:
            number = float(value)
        except (TypeError, ValueError) as exc:
            raise ParseError(
                f"element {element.name!r}: {value!r} is not numeric", raw=raw
            ) from exc
        if not math.isfinite(number):
            raise ParseError(f"element {element.name!r}: non-finite number", raw=raw)
        return number
    if element.value_kind is ValueKind.BOOLEAN_LIKE:
        if isinstance(value, bool):
            return int(value)
        if value in (0, 1):
            return int(value)
        if isinstance(value, str) and value.strip() in ("0", "1"):
            return int(value.strip())
        raise ParseError(
            f"element {element.name!r}: {value!r} is not 0 or 1", raw=raw
        )
    return str(value).strip()
