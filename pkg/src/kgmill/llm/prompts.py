"""Prompt templates, concept substitution, and auto-generated format
instructions.

Rendered prompts put every static part (format instructions, then the
template's fixed text) before the substituted concept wherever the template
permits, so providers that cache shared prompt prefixes bill less when only
the concept changes.
"""

from __future__ import annotations

from dataclasses import dataclass

from kgmill.errors import TemplateError
from kgmill.llm.schema import ResponseSchema, SchemaElement, ValueKind
from kgmill.llm.providers import Capabilities

PLACEHOLDER = "<<<concept>>>"


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt body with exactly one concept placeholder, ideally at the end."""

    body: str

    def __post_init__(self):
        n = self.body.count(PLACEHOLDER)
        if n != 1:
            raise TemplateError(
                f"template must contain exactly one {PLACEHOLDER!r}, found {n}"
            )

    def substitute(self, concept: str) -> str:
        return self.body.replace(PLACEHOLDER, concept)


def render_prompt(
    template: PromptTemplate,
    concept: str,
    schema: ResponseSchema,
    capabilities: Capabilities | None = None,
) -> str:
    """Full prompt: format instructions first, then the substituted body."""
    instructions = build_format_instructions(schema, capabilities or Capabilities())
    return f"{instructions}\n\n{template.substitute(concept)}"


def build_format_instructions(
    schema: ResponseSchema, capabilities: Capabilities
) -> str:
    if capabilities.structured_output:
        return _structured_instructions(schema)
    return _delimited_instructions(schema)


def _describe_value(element: SchemaElement) -> str:
    if element.dictionary is not None:
        lines = ["Answer only with one of the appropriate letter values that follow:"]
        lines += [f"  - {k}: {v}" for k, v in element.dictionary.entries]
        return "\n".join(lines)
    if element.value_kind is ValueKind.NUMERIC:
        return "a number"
    if element.value_kind is ValueKind.BOOLEAN_LIKE:
        return "0 or 1"
    return "a text string"


def _beceptivity_clause(element: SchemaElement) -> str:
    top = element.beceptivity_scale_max
    return (
        f"a number from 0 to {top:g} where 0 means the most general or vague "
        f"and {top:g} means the most specific and detailed"
    )


def _structured_instructions(schema: ResponseSchema) -> str:
    lines = [
        "Respond with a single JSON object and no other text.",
        "Provide these keys, in this order:",
    ]
    for element in schema.elements:
        desc = _describe_value(element)
        if element.multi_response:
            if element.beceptivity_requested:
                lines.append(
                    f'- "{element.name}": a JSON list of objects, one per distinct answer, '
                    f'each of the form {{"value": {desc}, "beceptivity": '
                    f"{_beceptivity_clause(element)}}}."
                )
            else:
                lines.append(
                    f'- "{element.name}": a JSON list, one item per distinct answer; '
                    f"each item is {desc}."
                )
        else:
            lines.append(f'- "{element.name}": {desc}.')
            if element.beceptivity_requested:
                lines.append(
                    f'- "{element.beceptivity_field}": {_beceptivity_clause(element)}.'
                )
    return "\n".join(lines)


def _delimited_instructions(schema: ResponseSchema) -> str:
    # Single-element schemas use a bare payload; otherwise one name-prefixed
    # line per element. Multi-response content is pipe-delimited within the
    # payload or line.
    if len(schema.elements) == 1:
        element = schema.elements[0]
        desc = _describe_value(element)
        if element.multi_response:
            text = (
                "Respond only with a series of pipe-delimited text snippets, "
                "one snippet per distinct answer, with no other text. "
                "Example: first answer|second answer|third answer."
            )
            if element.beceptivity_requested:
                text += (
                    " After each snippet append ' :: ' and "
                    + _beceptivity_clause(element)
                    + "."
                )
            return text
        text = f"Respond only with {desc}, and no other text."
        if element.beceptivity_requested:
            text += (
                " Then append ' :: ' followed by " + _beceptivity_clause(element) + "."
            )
        return text
    lines = [
        "Respond with one line per item, each formatted as 'name: content', "
        "in this order, with no other text:"
    ]
    for element in schema.elements:
        desc = _describe_value(element)
        if element.multi_response:
            content = f"pipe-delimited answers, each {desc}"
            if element.beceptivity_requested:
                content += (
                    ", each followed by ' :: ' and " + _beceptivity_clause(element)
                )
        else:
            content = desc
            if element.beceptivity_requested:
                content += ", then ' :: ' and " + _beceptivity_clause(element)
        lines.append(f"- {element.name}: {content}.")
    return "\n".join(lines)
