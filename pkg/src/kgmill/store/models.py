"""Domain records persisted by the store."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


@dataclass(frozen=True)
class TermString:
    text: str
    source_rank: int

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("term string text must be non-empty")
        if self.source_rank < 0:
            raise ValueError("source_rank must be >= 0")


@dataclass
class Code:
    """One terminology concept: a code identifier plus its ordered strings.

    main_string indexes into strings; import order rank 0 is taken as the
    preferred (main) string.
    """

    code_id: str
    terminology_id: int
    strings: list[TermString]
    main_string: int = 0

    def __post_init__(self):
        if not self.strings:
            raise ValueError(f"code {self.code_id!r} has no strings")
        if not 0 <= self.main_string < len(self.strings):
            raise ValueError(f"main_string {self.main_string} out of range")

    @property
    def main_text(self) -> str:
        return self.strings[self.main_string].text


@dataclass
class ImportReport:
    rows_seen: int = 0
    rows_stored: int = 0
    rows_rejected: int = 0
    rejected_samples: list[str] = field(default_factory=list)


@dataclass
class Terminology:
    id: int
    name: str
    codes: list[Code] = field(default_factory=list)
    import_report: ImportReport | None = None


@dataclass
class CodeSet:
    id: int
    terminology_id: int
    name: str
    member_code_ids: set[str]
    source_filter: str
    expansion_style: str | None = None
    warning: bool = False
    version: str = ""


class ObjectKind(str, Enum):
    FREE_TEXT = "free_text"
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


class Finalization(str, Enum):
    SINGLE = "single"
    VOTE = "vote"
    AVERAGE = "average"
    SUM = "sum"
    BOOLEAN_VOTE = "boolean_vote"


@dataclass(frozen=True)
class Triple:
    """One knowledge-graph edge: subject code, predicate, object value.

    (run_id, subject_code_id, predicate, object_value) is unique within the
    store; numeric objects must hold the text form of a finite number.
    """

    subject_code_id: str
    predicate: str
    object_value: str
    object_kind: ObjectKind = ObjectKind.FREE_TEXT
    finalization: Finalization = Finalization.SINGLE
    replaced_parent: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "object_kind", ObjectKind(self.object_kind))
        object.__setattr__(self, "finalization", Finalization(self.finalization))
        if self.object_kind is ObjectKind.NUMERIC:
            value = float(self.object_value)  # raises ValueError if malformed
            if value != value or value in (float("inf"), float("-inf")):
                raise ValueError("numeric object must be finite")


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    KILLED_BUDGET = "killed_budget"
    FAILED = "failed"


# Legal forward transitions; terminal states have no successors.
_RUN_TRANSITIONS = {
    RunStatus.PENDING: {RunStatus.RUNNING},
    RunStatus.RUNNING: {RunStatus.COMPLETED, RunStatus.KILLED_BUDGET, RunStatus.FAILED},
}


def allowed_transition(old: RunStatus, new: RunStatus) -> bool:
    return new in _RUN_TRANSITIONS.get(old, set())


@dataclass
class Run:
    id: int
    code_set_id: int
    spec_ids: list[str]
    status: RunStatus
    prompt_tokens: int = 0
    completion_tokens: int = 0
    accumulated_cost: str = "0"
    started_at: str | None = None
    ended_at: str | None = None


@dataclass
class CustomTable:
    name: str
    version: int
    defining_query: str
    columns: list[str]
    rows: list[list]
    created_at: str
