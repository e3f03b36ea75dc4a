"""Response schema: the shape a relationship prompt asks the LLM to return."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class ValueKind(str, Enum):
    FREE_TEXT = "free_text"
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"
    BOOLEAN_LIKE = "boolean_like"


@dataclass(frozen=True)
class ResponseDictionary:
    """Short key -> categorical value map embedded in the prompt.

    Keys must be unique and non-numeric (letters or short words); the model
    answers with a key, which is mapped back to the value for storage.
    """

    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        keys = [k for k, _ in self.entries]
        if not keys:
            raise ValueError("response dictionary must have at least one entry")
        if len(set(keys)) != len(keys):
            raise ValueError("response dictionary keys must be unique")
        for key in keys:
            if not key or any(ch.isdigit() for ch in key):
                raise ValueError(f"dictionary key {key!r} must be a non-numeric letter or short word")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> ResponseDictionary:
        return cls(tuple(mapping.items()))

    def as_mapping(self) -> dict[str, str]:
        return dict(self.entries)

    def lookup(self, key: str) -> str | None:
        mapping = self.as_mapping()
        if key in mapping:
            return mapping[key]
        folded = {k.lower(): v for k, v in self.entries}
        return folded.get(key.strip().lower())


@dataclass(frozen=True)
class SchemaElement:
    """One named element of the response.

    no_write elements (e.g. a reasoning field) are parsed but never persisted.
    beceptivity_requested asks the model to rate each value's specificity in
    the same response, under a separately named field so the two numbers are
    never confused.
    """

    name: str
    value_kind: ValueKind = ValueKind.FREE_TEXT
    multi_response: bool = False
    no_write: bool = False
    dictionary: ResponseDictionary | None = None
    beceptivity_requested: bool = False
    beceptivity_scale_max: float = 10.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("schema element needs a name")
        if self.multi_response and self.dictionary is not None:
            raise ValueError(
                f"element {self.name!r}: multi_response must be false when a "
                "response dictionary is defined"
            )

    @property
    def beceptivity_field(self) -> str:
        return f"{self.name}_beceptivity"


@dataclass(frozen=True)
class ResponseSchema:
    elements: tuple[SchemaElement, ...]

    def __post_init__(self):
        if not self.elements:
            raise ValueError("response schema needs at least one element")
        names = [e.name for e in self.elements]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate element names: {names}")

    def element(self, name: str) -> SchemaElement:
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    def persistable(self) -> tuple[SchemaElement, ...]:
        return tuple(e for e in self.elements if not e.no_write)

    def merged_with(self, other: ResponseSchema) -> ResponseSchema:
        return ResponseSchema(self.elements + other.elements)
