from kgmill.llm.budget import CONTINUE, KILL, CostLedger, TokenUsage, record_usage_and_check_budget
from kgmill.llm.parsing import ParsedResponse, map_dictionary_response, parse_response
from kgmill.llm.prompts import PLACEHOLDER, PromptTemplate, build_format_instructions, render_prompt
from kgmill.llm.providers import (
    Capabilities,
    Provider,
    ProviderOptions,
    RecordingProvider,
    ReplayProvider,
    Transcript,
    canonicalize_prompt,
    prompt_key,
    replay_provider,
    send_with_retry,
)
from kgmill.llm.schema import ResponseDictionary, ResponseSchema, SchemaElement, ValueKind

__all__ = [
    "CONTINUE", "KILL", "CostLedger", "TokenUsage", "record_usage_and_check_budget",
    "ParsedResponse", "map_dictionary_response", "parse_response",
    "PLACEHOLDER", "PromptTemplate", "build_format_instructions", "render_prompt",
    "Capabilities", "Provider", "ProviderOptions", "RecordingProvider",
    "ReplayProvider", "Transcript", "canonicalize_prompt", "prompt_key",
    "replay_provider", "send_with_retry",
    "ResponseDictionary", "ResponseSchema", "SchemaElement", "ValueKind",
]
