"""Per-run token accounting with a dollar kill-switch.

All currency arithmetic is exact decimal; the kill decision fires exactly
when accumulated cost exceeds the limit, is sticky, and is visible to every
worker before its next dispatch. Budget scope is a single run — costs are
not aggregated across runs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from decimal import Decimal


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int
    completion_tokens: int


CONTINUE = "continue"
KILL = "kill"


def _as_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(str(value))
    return Decimal(value)


class CostLedger:
    """Linearizable token/cost accumulator for one run."""

    def __init__(self, price_per_prompt_token, price_per_completion_token,
                 dollar_limit=None):
        self.price_in = _as_decimal(price_per_prompt_token)
        self.price_out = _as_decimal(price_per_completion_token)
        self.dollar_limit = None if dollar_limit is None else _as_decimal(dollar_limit)
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.killed = False
        self._lock = threading.Lock()

    @property
    def accumulated_cost(self) -> Decimal:
        return (self.prompt_tokens * self.price_in
                + self.completion_tokens * self.price_out)

    def record(self, usage: TokenUsage) -> str:
        """Atomically add usage; returns "kill" once cost exceeds the limit."""
        from kgmill.errors import AccountingError

        if usage.prompt_tokens < 0 or usage.completion_tokens < 0:
            raise AccountingError(f"negative token usage: {usage}")
        with self._lock:
            self.prompt_tokens += usage.prompt_tokens
            self.completion_tokens += usage.completion_tokens
            if (self.dollar_limit is not None
                    and self.accumulated_cost > self.dollar_limit):
                self.killed = True
            return KILL if self.killed else CONTINUE

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
                "accumulated_cost": str(self.accumulated_cost),
                "dollar_limit": None if self.dollar_limit is None else str(self.dollar_limit),
                "killed": self.killed,
            }


def record_usage_and_check_budget(ledger: CostLedger, usage: TokenUsage) -> str:
    return ledger.record(usage)
