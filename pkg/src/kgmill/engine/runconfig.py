"""Declarative run configuration (YAML): code set, relationship specs,
grouping, budget, and worker count.

Example:

    code_set: diagnoses
    worker_count: 1
    budget:
      dollar_limit: "1.00"
      price_per_prompt_token: "0.0001"
      price_per_completion_token: "0.0002"
    grouping: [[0], [1, 2]]
    relationships:
      - predicate: has_complication_of
        template: "What are the complications of <<<concept>>>?"
        elements:
          - {name: answer, value_kind: free_text, multi_response: true}
        are_you_sure: {mode: none}
        beceptivity: {method: requery, min_required: 6}
        expansion_styles: [simple]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from kgmill.engine.specs import AreYouSureConfig, BeceptivityConfig, RelationshipSpec
from kgmill.errors import ConfigError
from kgmill.llm.budget import CostLedger
from kgmill.llm.prompts import PromptTemplate
from kgmill.llm.schema import (
    ResponseDictionary,
    ResponseSchema,
    SchemaElement,
    ValueKind,
)


@dataclass
class RunPlan:
    code_set: str | int
    specs: list[RelationshipSpec]
    grouping: list[list[int]] | None = None
    worker_count: int = 1
    budget: dict = field(default_factory=dict)

    def build_ledger(self) -> CostLedger:
        return CostLedger(
            self.budget.get("price_per_prompt_token", 0),
            self.budget.get("price_per_completion_token", 0),
            self.budget.get("dollar_limit"),
        )


def load_run_plan(path: str | Path) -> RunPlan:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"run config not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"run config {path} is not valid YAML: {exc}")
    return parse_run_plan(raw)


def parse_run_plan(raw: dict) -> RunPlan:
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a mapping")
    try:
        code_set = raw["code_set"]
        relationships = raw["relationships"]
    except KeyError as exc:
        raise ConfigError(f"run config missing required key: {exc}")
    if not isinstance(relationships, list) or not relationships:
        raise ConfigError("'relationships' must be a non-empty list")
    specs = [_parse_spec(entry, i) for i, entry in enumerate(relationships)]
    grouping = raw.get("grouping")
    if grouping is not None and (
        not isinstance(grouping, list)
        or not all(isinstance(g, list) for g in grouping)
    ):
        raise ConfigError("'grouping' must be a list of index lists")
    return RunPlan(
        code_set=code_set,
        specs=specs,
        grouping=grouping,
        worker_count=int(raw.get("worker_count", 1)),
        budget=raw.get("budget", {}) or {},
    )


def _parse_spec(entry: dict, index: int) -> RelationshipSpec:
    where = f"relationships[{index}]"
    try:
        predicate = entry["predicate"]
        template = PromptTemplate(entry["template"])
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}")
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}")

    beceptivity = BeceptivityConfig(**(entry.get("beceptivity") or {"method": "none"}))
    are_you_sure = AreYouSureConfig(**(entry.get("are_you_sure") or {}))

    element_entries = entry.get("elements") or [entry.get("element") or {"name": "answer"}]
    elements = []
    for spec in element_entries:
        spec = dict(spec)
        try:
            dictionary = spec.pop("dictionary", None)
            if dictionary is not None:
                dictionary = ResponseDictionary.from_mapping(dictionary)
            kind = ValueKind(spec.pop("value_kind", "free_text"))
            element = SchemaElement(
                name=spec.pop("name"),
                value_kind=kind,
                multi_response=bool(spec.pop("multi_response", False)),
                no_write=bool(spec.pop("no_write", False)),
                dictionary=dictionary,
                beceptivity_requested=bool(spec.pop("beceptivity_requested", False)),
                beceptivity_scale_max=float(
                    spec.pop("beceptivity_scale_max", beceptivity.scale_max)
                ),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}")
        if spec:
            raise ConfigError(f"{where}: unknown element keys {sorted(spec)}")
        elements.append(element)

    # The inline method needs the answer element to carry the rating field.
    if beceptivity.method == "inline":
        elements = [
            e if e.no_write else _with_rating(e, beceptivity.scale_max)
            for e in elements
        ]

    try:
        return RelationshipSpec(
            predicate=predicate,
            template=template,
            schema=ResponseSchema(tuple(elements)),
            are_you_sure=are_you_sure,
            beceptivity=beceptivity,
            object_expansion_styles=tuple(entry.get("expansion_styles") or ()),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}")


def _with_rating(element: SchemaElement, scale_max: float) -> SchemaElement:
    if element.beceptivity_requested:
        return element
    return SchemaElement(
        name=element.name,
        value_kind=element.value_kind,
        multi_response=element.multi_response,
        no_write=element.no_write,
        dictionary=element.dictionary,
        beceptivity_requested=True,
        beceptivity_scale_max=scale_max,
    )
