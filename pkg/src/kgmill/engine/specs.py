"""Relationship specifications: what to ask, how to finalize, how to refine."""

from __future__ import annotations

from dataclasses import dataclass, field

from kgmill.llm.prompts import PromptTemplate
from kgmill.llm.schema import ResponseSchema, SchemaElement, ValueKind


@dataclass(frozen=True)
class AreYouSureConfig:
    """Repeat sampling of the same prompt with a finalization mode.

    repeats counts total samples including the first; when a mode is chosen
    without a repeat count, three samples are taken.
    """

    mode: str = "none"  # vote | average | sum | boolean_vote | none
    repeats: int | None = None

    _MODES = ("vote", "average", "sum", "boolean_vote", "none")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ValueError(f"unknown are-you-sure mode {self.mode!r}")
        if self.repeats is None:
            object.__setattr__(self, "repeats", 1 if self.mode == "none" else 3)
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True)
class BeceptivityConfig:
    """Specificity enforcement: scale bottom is always zero, higher is more
    specific; items scoring under min_required get replaced by refinement."""

    method: str = "none"  # inline | requery | db_lookup | none
    min_required: float = 6.0
    scale_max: float = 10.0
    max_refinement_depth: int = 2

    _METHODS = ("inline", "requery", "db_lookup", "none")

    def __post_init__(self):
        if self.method not in self._METHODS:
            raise ValueError(f"unknown beceptivity method {self.method!r}")
        if self.scale_max <= 0:
            raise ValueError("scale_max must be > 0")
        if not 0 <= self.min_required <= self.scale_max:
            raise ValueError("min_required must be within [0, scale_max]")
        if self.max_refinement_depth < 1:
            raise ValueError("max_refinement_depth must be >= 1")


@dataclass(frozen=True)
class ExpansionString:
    source_text: str
    style: str
    generated_texts: tuple[str, ...]
    model_id: str


@dataclass(frozen=True)
class BeceptivityAssessment:
    text: str
    value: float
    source: str  # inline | requery | db_lookup


@dataclass(frozen=True)
class RelationshipSpec:
    """One relationship type: predicate, prompt, schema, and mitigations.

    The schema holds exactly one persistable answer element; no_write
    elements (reasoning and the like) may precede or follow it. Several
    specs can share one prompt via run grouping.
    """

    predicate: str
    template: PromptTemplate
    schema: ResponseSchema
    are_you_sure: AreYouSureConfig = field(default_factory=AreYouSureConfig)
    beceptivity: BeceptivityConfig = field(default_factory=BeceptivityConfig)
    object_expansion_styles: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("predicate must be non-empty")
        persistable = self.schema.persistable()
        if len(persistable) != 1:
            raise ValueError(
                f"spec {self.predicate!r}: schema must have exactly one "
                f"persistable element, found {len(persistable)}"
            )
        element = persistable[0]
        mode = self.are_you_sure.mode
        if mode in ("vote",) and element.value_kind not in (
            ValueKind.CATEGORICAL, ValueKind.BOOLEAN_LIKE,
        ) and element.dictionary is None:
            raise ValueError(f"spec {self.predicate!r}: vote needs a categorical element")
        if mode == "boolean_vote" and element.value_kind is not ValueKind.BOOLEAN_LIKE:
            raise ValueError(f"spec {self.predicate!r}: boolean_vote needs a boolean_like element")
        if mode in ("average", "sum") and element.value_kind is not ValueKind.NUMERIC:
            raise ValueError(f"spec {self.predicate!r}: {mode} needs a numeric element")
        if element.multi_response and mode != "none":
            raise ValueError(
                f"spec {self.predicate!r}: repeat-sample finalization is not "
                "supported for multi-response elements"
            )
        if self.beceptivity.method == "inline" and not element.beceptivity_requested:
            raise ValueError(
                f"spec {self.predicate!r}: inline beceptivity requires the answer "
                "element to request a beceptivity rating"
            )

    @property
    def element(self) -> SchemaElement:
        return self.schema.persistable()[0]


@dataclass(frozen=True)
class PromptGroup:
    """Specs answered by a single prompt; they must share one template."""

    specs: tuple[RelationshipSpec, ...]

    def __post_init__(self):
        if not self.specs:
            raise ValueError("prompt group must contain at least one spec")
        bodies = {s.template.body for s in self.specs}
        if len(bodies) != 1:
            raise ValueError("grouped specs must share one prompt template")

    @property
    def template(self) -> PromptTemplate:
        return self.specs[0].template

    @property
    def repeats(self) -> int:
        return max(s.are_you_sure.repeats for s in self.specs)

    def combined_schema(self) -> ResponseSchema:
        elements: list[SchemaElement] = []
        for spec in self.specs:
            elements.extend(spec.schema.elements)
        return ResponseSchema(tuple(elements))


def build_groups(
    specs: list[RelationshipSpec], grouping: list[list[int]] | None
) -> list[PromptGroup]:
    """Partition specs into prompt groups; None means one group per spec."""
    if grouping is None:
        return [PromptGroup((spec,)) for spec in specs]
    claimed = sorted(i for group in grouping for i in group)
    if claimed != list(range(len(specs))):
        raise ValueError(
            f"grouping must partition spec indexes 0..{len(specs) - 1}, got {claimed}"
        )
    return [PromptGroup(tuple(specs[i] for i in group)) for group in grouping]
