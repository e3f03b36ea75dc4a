"""Specificity (beceptivity) assessment and refinement of overly general
response items.

Three assessment methods are supported: inline (the rating arrived with the
item in the same response), requery (a dedicated provider prompt per string,
answered with a bare number), and db_lookup (depth within a stored hierarchy,
scaled so a deepest leaf earns scale_max). Assessed magnitudes are cached per
string; refinement replacements are concept-specific and never cached.

The requery and refinement prompt builders are module functions so offline
transcripts can be constructed against the exact prompts the engine sends.
"""

from __future__ import annotations

import re

from kgmill.engine.specs import BeceptivityAssessment, BeceptivityConfig
from kgmill.errors import AssessmentError, ProviderError
from kgmill.llm.budget import CostLedger
from kgmill.llm.providers import Provider, ProviderOptions, send_with_retry
from kgmill.store.repository import Store

_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


def beceptivity_requery_prompt(text: str, scale_max: float) -> str:
    """Concept-free by design: the rating is cached per string."""
    return (
        f"Rate the following term on a scale from 0 to {scale_max:g}, where 0 "
        "means the term is as general or vague as possible and "
        f"{scale_max:g} means it is as specific and detailed as possible. "
        f"Answer only with the number. Term: {text}"
    )


def refinement_prompt(item: str, concept: str, scale_max: float) -> str:
    """Concept-specific: more specific replacements for an overly general item."""
    return (
        "The answer below was too general. Respond only with a pipe-delimited "
        "list of more specific replacements for it, each one as specific as "
        f"possible, in the context of: {concept}. Answer to replace: {item}"
    )


def parse_rating(raw: str, scale_max: float) -> float:
    """First number in the payload, clamped into [0, scale_max]."""
    found = _NUMBER.search(raw)
    if found is None:
        raise AssessmentError(f"no numeric rating in response: {raw[:80]!r}")
    return min(max(float(found.group()), 0.0), scale_max)


class BeceptivityAssessor:
    def __init__(self, store: Store, provider: Provider,
                 ledger: CostLedger | None = None,
                 options: ProviderOptions | None = None):
        self.store = store
        self.provider = provider
        self.ledger = ledger
        self.options = options

    def assess(
        self,
        text: str,
        concept_context: str,
        config: BeceptivityConfig,
        inline_value: float | None = None,
    ) -> BeceptivityAssessment:
        """Value for one string; cached magnitudes are reused across concepts."""
        if config.method == "none":
            raise ValueError("assessment requested with method 'none'")
        cached = self.store.get_beceptivity(text, config.method)
        if cached is not None:
            return BeceptivityAssessment(text, cached, config.method)

        if config.method == "inline":
            if inline_value is None:
                raise AssessmentError(f"response carried no rating for {text!r}")
            value = min(max(float(inline_value), 0.0), config.scale_max)
        elif config.method == "requery":
            prompt = beceptivity_requery_prompt(text, config.scale_max)
            try:
                outcome = send_with_retry(self.provider, prompt, self.ledger, self.options)
            except ProviderError as exc:
                raise AssessmentError(f"rating query failed for {text!r}: {exc}") from exc
            value = parse_rating(outcome.response, config.scale_max)
        else:  # db_lookup
            located = self.store.hierarchy_depth(text)
            if located is None:
                raise AssessmentError(f"{text!r} is not in the beceptivity hierarchy")
            depth, max_depth = located
            value = config.scale_max * (depth / max_depth if max_depth else 1.0)

        self.store.put_beceptivity(text, config.method, value)
        return BeceptivityAssessment(text, value, config.method)

    def refine(
        self, item: str, concept: str, config: BeceptivityConfig
    ) -> list[tuple[str, float | None]]:
        """Concept-specific replacements for an under-beceptive item.

        Each replacement may carry its own ' :: rating' suffix (used by the
        inline method to rate replacements without re-querying).
        """
        prompt = refinement_prompt(item, concept, config.scale_max)
        outcome = send_with_retry(self.provider, prompt, self.ledger, self.options)
        replacements: list[tuple[str, float | None]] = []
        for part in outcome.response.split("|"):
            part = part.strip()
            if not part:
                continue
            if "::" in part:
                text, _, rating = part.rpartition("::")
                try:
                    replacements.append((text.strip(), float(rating.strip())))
                    continue
                except ValueError:
                    pass
            replacements.append((part, None))
        return replacements
