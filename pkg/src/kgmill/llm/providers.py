"""Provider contract, the record/replay fixture provider, and retry logic.

A provider is anything with a capabilities field and a send(prompt, options)
method returning (raw_response, TokenUsage). Replay providers serve recorded
transcripts keyed by the canonicalized prompt (trimmed, internal whitespace
collapsed) so cosmetic template changes do not break fixtures.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

from kgmill.errors import (
    BudgetExceeded,
    ProviderError,
    ProviderTransientError,
    TranscriptError,
    UnknownPrompt,
)
from kgmill.llm.budget import CostLedger, TokenUsage


@dataclass(frozen=True)
class Capabilities:
    structured_output: bool = True


@dataclass(frozen=True)
class ProviderOptions:
    model: str | None = None
    temperature: float = 0.0
    max_tokens: int | None = None


@runtime_checkable
class Provider(Protocol):
    capabilities: Capabilities
    model_id: str

    def send(self, prompt: str, options: ProviderOptions | None = None) -> tuple[str, TokenUsage]:
        ...


def canonicalize_prompt(text: str) -> str:
    """Trim and collapse internal whitespace; the replay transcript key."""
    return " ".join(text.split())


def prompt_key(text: str) -> str:
    return hashlib.sha256(canonicalize_prompt(text).encode("utf-8")).hexdigest()


@dataclass
class TranscriptRecord:
    prompt: str
    response: str
    prompt_tokens: int
    completion_tokens: int


class Transcript:
    """Prompt -> (response, usage) map, serialized as line-delimited JSON.

    Each line holds (key, prompt, response, prompt_tokens, completion_tokens)
    where key is the sha256 of the canonicalized prompt.
    """

    def __init__(self):
        self.records: dict[str, TranscriptRecord] = {}

    def add(self, prompt: str, response: str,
            prompt_tokens: int = 100, completion_tokens: int = 50) -> None:
        key = prompt_key(prompt)
        if key in self.records:
            raise TranscriptError(f"duplicate prompt key {key[:12]}… in transcript")
        self.records[key] = TranscriptRecord(
            prompt, response, prompt_tokens, completion_tokens
        )

    def save(self, path: str | Path) -> None:
        lines = []
        for key in sorted(self.records):
            r = self.records[key]
            lines.append(json.dumps({
                "key": key,
                "prompt": r.prompt,
                "response": r.response,
                "prompt_tokens": r.prompt_tokens,
                "completion_tokens": r.completion_tokens,
            }, ensure_ascii=False))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Transcript:
        transcript = cls()
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), 1
        ):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = rec["key"]
                prompt = rec["prompt"]
                response = rec["response"]
                pt = int(rec["prompt_tokens"])
                ct = int(rec["completion_tokens"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise TranscriptError(f"{path}:{lineno}: malformed record: {exc}") from exc
            if key != prompt_key(prompt):
                raise TranscriptError(
                    f"{path}:{lineno}: key does not match canonicalized prompt"
                )
            if key in transcript.records:
                raise TranscriptError(f"{path}:{lineno}: duplicate prompt key")
            transcript.records[key] = TranscriptRecord(prompt, response, pt, ct)
        return transcript


class ReplayProvider:
    """Deterministic provider serving a recorded transcript.

    Unknown prompts either raise UnknownPrompt (policy='error') or return the
    configured fallback (policy='fallback'). Counts every send for
    cache-contract and kill-switch assertions.
    """

    def __init__(self, transcript: Transcript, policy: str = "error",
                 fallback: tuple[str, TokenUsage] | None = None,
                 capabilities: Capabilities = Capabilities(structured_output=True),
                 model_id: str = "replay-model"):
        if policy not in ("error", "fallback"):
            raise ValueError(f"unknown policy {policy!r}")
        if policy == "fallback" and fallback is None:
            fallback = ("", TokenUsage(0, 0))
        self.transcript = transcript
        self.policy = policy
        self.fallback = fallback
        self.capabilities = capabilities
        self.model_id = model_id
        self.calls = 0
        self.sent_prompts: list[str] = []

    def send(self, prompt: str, options: ProviderOptions | None = None) -> tuple[str, TokenUsage]:
        self.calls += 1
        self.sent_prompts.append(prompt)
        record = self.transcript.records.get(prompt_key(prompt))
        if record is None:
            if self.policy == "fallback":
                return self.fallback
            raise UnknownPrompt(
                f"no transcript entry for prompt: {canonicalize_prompt(prompt)[:120]!r}"
            )
        return record.response, TokenUsage(record.prompt_tokens, record.completion_tokens)


def replay_provider(transcript_file: str | Path, policy: str = "error",
                    fallback: tuple[str, TokenUsage] | None = None,
                    structured_output: bool = True) -> ReplayProvider:
    transcript = Transcript.load(transcript_file)
    return ReplayProvider(
        transcript, policy=policy, fallback=fallback,
        capabilities=Capabilities(structured_output=structured_output),
    )


class RecordingProvider:
    """Wraps a live provider and appends every exchange to a transcript file."""

    def __init__(self, inner: Provider, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.capabilities = inner.capabilities
        self.model_id = inner.model_id
        self._transcript = Transcript()

    def send(self, prompt: str, options: ProviderOptions | None = None) -> tuple[str, TokenUsage]:
        response, usage = self.inner.send(prompt, options)
        key = prompt_key(prompt)
        if key not in self._transcript.records:
            self._transcript.add(prompt, response, usage.prompt_tokens, usage.completion_tokens)
            self._transcript.save(self.path)
        return response, usage


@dataclass
class SendOutcome:
    response: str
    usage: TokenUsage
    decision: str  # "continue" | "kill"
    attempts: int = 1


def send_with_retry(
    provider: Provider,
    prompt: str,
    ledger: CostLedger | None = None,
    options: ProviderOptions | None = None,
    max_attempts: int = 3,
    backoff_base: float = 0.05,
) -> SendOutcome:
    """Send with up to max_attempts on transient failures.

    Tokens reported by failed attempts are billed too (the conservative
    choice); the budget decision reflects the final ledger state. Once a
    ledger has killed, every subsequent call refuses to dispatch, so all
    workers observe the kill before their next request.
    """
    if ledger is not None and ledger.killed:
        raise BudgetExceeded("dollar limit exceeded; refusing to dispatch")
    last_exc: Exception | None = None
    for attempt in range(1, max_attempts + 1):
        try:
            response, usage = provider.send(prompt, options)
        except ProviderTransientError as exc:
            last_exc = exc
            attempt_usage = getattr(exc, "usage", None)
            if ledger is not None and attempt_usage is not None:
                ledger.record(attempt_usage)
            if attempt < max_attempts:
                time.sleep(backoff_base * 2 ** (attempt - 1))
            continue
        decision = ledger.record(usage) if ledger is not None else "continue"
        return SendOutcome(response, usage, decision, attempt)
    raise ProviderError(
        f"provider failed after {max_attempts} attempts: {last_exc}"
    ) from last_exc
