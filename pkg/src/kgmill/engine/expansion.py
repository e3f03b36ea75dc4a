"""Expansion strings: LLM-generated restylings of a string, cached forever.

An expansion set is generated once per (text, style, model); each generated
text is embedded, and a mean-pooled CLS summary vector for the set is
persisted alongside. Provider failures surface as ExpansionError so the
calling pipeline can proceed without expansions.
"""

from __future__ import annotations

from kgmill.embeddings.service import EmbeddingService
from kgmill.engine.specs import ExpansionString
from kgmill.errors import ExpansionError, ProviderError
from kgmill.llm.budget import CostLedger
from kgmill.llm.providers import Provider, ProviderOptions, send_with_retry
from kgmill.store.repository import Store


def expansion_prompt(text: str, style: str) -> str:
    return (
        f"Rewrite the phrase at the end of this prompt in the style '{style}'. "
        "Produce several alternative versions with the same meaning. Respond "
        "only with a pipe-delimited list of the alternative versions. "
        f"Phrase: {text}"
    )


class Expander:
    def __init__(self, store: Store, provider: Provider, embedding: EmbeddingService,
                 ledger: CostLedger | None = None,
                 options: ProviderOptions | None = None):
        self.store = store
        self.provider = provider
        self.embedding = embedding
        self.ledger = ledger
        self.options = options

    def expand_string(self, text: str, style: str) -> ExpansionString:
        if not text or not style:
            raise ValueError("text and style must be non-empty")
        model = self.embedding.embedder.model_id
        cached = self.store.get_expansion(text, style, model)
        if cached is not None:
            return ExpansionString(text, style, tuple(cached), model)

        try:
            outcome = send_with_retry(
                self.provider, expansion_prompt(text, style), self.ledger, self.options
            )
        except ProviderError as exc:
            raise ExpansionError(f"expansion failed for {text!r}/{style!r}: {exc}") from exc
        generated = [p.strip() for p in outcome.response.split("|") if p.strip()]
        if not generated:
            raise ExpansionError(f"empty expansion set for {text!r}/{style!r}")

        self.store.put_expansion(text, style, model, generated)
        self.embedding.expansion_summary_vector(text, style, generated)
        return ExpansionString(text, style, tuple(generated), model)
