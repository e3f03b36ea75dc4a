"""Run orchestration: iterate a code set through relationship prompt groups
and write the surviving triples.

Per (concept, group) item the pipeline is: render the prompt once, sample it
repeats times, then per relationship element finalize the samples, enforce
beceptivity with refinement, generate expansion strings, and insert triples.
A budget kill aborts the in-flight item and skips the rest; completed items'
triples are retained and the run ends killed_budget.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from kgmill.embeddings.service import EmbeddingService
from kgmill.engine.beceptivity import BeceptivityAssessor
from kgmill.engine.expansion import Expander
from kgmill.engine.finalize import (
    finalize_boolean,
    finalize_categorical_vote,
    finalize_numeric,
)
from kgmill.engine.specs import (
    BeceptivityConfig,
    PromptGroup,
    RelationshipSpec,
    build_groups,
)
from kgmill.errors import (
    AssessmentError,
    BudgetExceeded,
    ExpansionError,
    KeyUnmapped,
    ParseError,
    ProviderError,
)
from kgmill.llm.budget import CostLedger
from kgmill.llm.parsing import ParsedItem, ParsedResponse, parse_response
from kgmill.llm.prompts import render_prompt
from kgmill.llm.providers import Provider, ProviderOptions, send_with_retry
from kgmill.llm.schema import ValueKind
from kgmill.store.models import Code, Finalization, ObjectKind, RunStatus, Triple
from kgmill.store.repository import Store

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    run_id: int
    status: str = "running"
    triples_written: int = 0
    items_done: int = 0
    items_refined: int = 0
    items_dropped: int = 0
    items_killed: int = 0
    items_failed: int = 0
    key_unmapped: int = 0
    elements_missing: int = 0
    parse_failures: int = 0
    expansion_failures: int = 0
    provider_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    accumulated_cost: str = "0"

    def merge(self, other: RunReport) -> None:
        for name in (
            "triples_written", "items_done", "items_refined", "items_dropped",
            "items_killed", "items_failed", "key_unmapped", "elements_missing",
            "parse_failures", "expansion_failures", "provider_calls",
        ):
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class _FinalizedItem:
    value: object
    beceptivity: float | None
    finalization: Finalization


class ExtractionEngine:
    def __init__(
        self,
        store: Store,
        provider: Provider,
        embedding: EmbeddingService,
        options: ProviderOptions | None = None,
        worker_count: int = 1,
        retry_backoff: float = 0.05,
    ):
        self.store = store
        self.provider = provider
        self.embedding = embedding
        self.options = options
        self.worker_count = max(1, worker_count)
        self.retry_backoff = retry_backoff

    def run_population(
        self,
        code_set_id: int,
        specs: list[RelationshipSpec],
        grouping: list[list[int]] | None = None,
        ledger: CostLedger | None = None,
        on_progress=None,
    ) -> RunReport:
        groups = build_groups(specs, grouping)
        ledger = ledger if ledger is not None else CostLedger(0, 0)
        run = self.store.create_run(code_set_id, [s.predicate for s in specs])
        self.store.set_run_status(run.id, RunStatus.RUNNING)
        report = RunReport(run_id=run.id)
        assessor = BeceptivityAssessor(self.store, self.provider, ledger, self.options)
        expander = Expander(self.store, self.provider, self.embedding, ledger, self.options)

        codes = self.store.code_set_codes(code_set_id)
        done = 0

        def advance(delta: RunReport) -> None:
            nonlocal done
            report.merge(delta)
            done += 1
            if on_progress is not None:
                on_progress(done, len(codes))

        try:
            if self.worker_count == 1:
                for code in codes:
                    advance(
                        self._process_concept(run.id, code, groups, ledger, assessor, expander)
                    )
            else:
                with ThreadPoolExecutor(max_workers=self.worker_count) as pool:
                    futures = [
                        pool.submit(
                            self._process_concept, run.id, code, groups,
                            ledger, assessor, expander,
                        )
                        for code in codes
                    ]
                    for future in futures:
                        advance(future.result())
        except Exception:
            snapshot = ledger.snapshot()
            self.store.set_run_status(
                run.id, RunStatus.FAILED,
                prompt_tokens=snapshot["prompt_tokens"],
                completion_tokens=snapshot["completion_tokens"],
                accumulated_cost=snapshot["accumulated_cost"],
            )
            raise

        snapshot = ledger.snapshot()
        status = RunStatus.KILLED_BUDGET if ledger.killed else RunStatus.COMPLETED
        self.store.set_run_status(
            run.id, status,
            prompt_tokens=snapshot["prompt_tokens"],
            completion_tokens=snapshot["completion_tokens"],
            accumulated_cost=snapshot["accumulated_cost"],
        )
        report.status = status.value
        report.prompt_tokens = snapshot["prompt_tokens"]
        report.completion_tokens = snapshot["completion_tokens"]
        report.accumulated_cost = snapshot["accumulated_cost"]
        return report

    # -- per-concept pipeline ------------------------------------------------

    def _process_concept(
        self,
        run_id: int,
        code: Code,
        groups: list[PromptGroup],
        ledger: CostLedger,
        assessor: BeceptivityAssessor,
        expander: Expander,
    ) -> RunReport:
        delta = RunReport(run_id=run_id)
        for group in groups:
            if ledger.killed:
                delta.items_killed += 1
                continue
            try:
                self._process_item(run_id, code, group, ledger, assessor, expander, delta)
                delta.items_done += 1
            except BudgetExceeded:
                delta.items_killed += 1
            except ProviderError as exc:
                logger.warning("item %s/%s failed: %s", code.code_id, group.template.body[:40], exc)
                delta.items_failed += 1
        return delta

    def _process_item(
        self,
        run_id: int,
        code: Code,
        group: PromptGroup,
        ledger: CostLedger,
        assessor: BeceptivityAssessor,
        expander: Expander,
        report: RunReport,
    ) -> None:
        schema = group.combined_schema()
        prompt = render_prompt(
            group.template, code.main_text, schema, self.provider.capabilities
        )
        samples: list[ParsedResponse] = []
        for _ in range(group.repeats):
            outcome = send_with_retry(
                self.provider, prompt, ledger, self.options,
                backoff_base=self.retry_backoff,
            )
            report.provider_calls += outcome.attempts
            try:
                samples.append(
                    parse_response(outcome.response, schema,
                                   self.provider.capabilities, strict=False)
                )
            except ParseError as exc:
                logger.warning("unparseable sample for %s: %s", code.code_id, exc)
                report.parse_failures += 1
            if ledger.killed:
                raise BudgetExceeded("budget crossed mid-item")
        if not samples:
            report.items_failed += 1
            return

        for spec in group.specs:
            finalized = self._finalize_element(spec, samples, report)
            if finalized is None:
                continue
            triples = self._build_triples(
                run_id, code, spec, finalized, ledger, assessor, expander, report
            )
            if triples:
                report.triples_written += self.store.insert_triples(run_id, triples)

    def _finalize_element(
        self, spec: RelationshipSpec, samples: list[ParsedResponse], report: RunReport
    ) -> list[_FinalizedItem] | None:
        element = spec.element
        usable = []
        for parsed in samples:
            holder = parsed.elements.get(element.name)
            if holder is None or element.name in parsed.missing:
                report.elements_missing += 1
                continue
            if holder.error is not None:
                if isinstance(holder.error, KeyUnmapped):
                    report.key_unmapped += 1
                else:
                    report.parse_failures += 1
                continue
            if holder.items:
                usable.append(holder)
        if not usable:
            return None

        if element.multi_response:
            return [
                _FinalizedItem(item.value, item.beceptivity, Finalization.SINGLE)
                for item in usable[0].items
            ]

        mode = spec.are_you_sure.mode
        first = usable[0].items[0]
        if mode == "none":
            return [_FinalizedItem(first.value, first.beceptivity, Finalization.SINGLE)]
        values = [holder.items[0].value for holder in usable]
        if mode == "vote":
            voted = finalize_categorical_vote(values)
            rating = next(
                (h.items[0].beceptivity for h in usable if h.items[0].value == voted),
                None,
            )
            return [_FinalizedItem(voted, rating, Finalization.VOTE)]
        if mode == "boolean_vote":
            return [_FinalizedItem(finalize_boolean(values), None, Finalization.BOOLEAN_VOTE)]
        final = finalize_numeric(values, mode)
        kind = Finalization.AVERAGE if mode == "average" else Finalization.SUM
        return [_FinalizedItem(final, None, kind)]

    # -- triple construction ---------------------------------------------------

    def _build_triples(
        self,
        run_id: int,
        code: Code,
        spec: RelationshipSpec,
        finalized: list[_FinalizedItem],
        ledger: CostLedger,
        assessor: BeceptivityAssessor,
        expander: Expander,
        report: RunReport,
    ) -> list[Triple]:
        element = spec.element
        object_kind = _object_kind(element)
        triples: list[Triple] = []
        for item in finalized:
            if object_kind is ObjectKind.FREE_TEXT and spec.beceptivity.method != "none":
                survivors = self._enforce_beceptivity(
                    run_id, code, spec, item, assessor, report
                )
            else:
                survivors = [(item, None)]
            for survivor, parent in survivors:
                text = _object_text(survivor.value, element)
                if object_kind is ObjectKind.FREE_TEXT:
                    for style in spec.object_expansion_styles:
                        try:
                            expander.expand_string(text, style)
                        except ExpansionError as exc:
                            logger.warning("expansion failed: %s", exc)
                            report.expansion_failures += 1
                triples.append(
                    Triple(
                        subject_code_id=code.code_id,
                        predicate=spec.predicate,
                        object_value=text,
                        object_kind=object_kind,
                        finalization=item.finalization,
                        replaced_parent=parent,
                    )
                )
        return triples

    def _enforce_beceptivity(
        self,
        run_id: int,
        code: Code,
        spec: RelationshipSpec,
        item: _FinalizedItem,
        assessor: BeceptivityAssessor,
        report: RunReport,
    ) -> list[tuple[_FinalizedItem, str | None]]:
        """Keep adequately specific texts; replace the rest, up to the depth
        budget. Returns (item, replaced_parent) pairs; originals carry None."""
        config = spec.beceptivity
        concept = code.main_text
        survivors: list[tuple[_FinalizedItem, str | None]] = []

        def walk(text: str, inline: float | None, parent: str | None, depth: int) -> None:
            try:
                value = assessor.assess(text, concept, config, inline_value=inline).value
            except AssessmentError:
                value = None  # unparsable rating counts as under-beceptive
            if value is not None and value >= config.min_required:
                survivors.append(
                    (_FinalizedItem(text, value, item.finalization), parent)
                )
                return
            if depth >= config.max_refinement_depth:
                report.items_dropped += 1
                return
            replacements = assessor.refine(text, concept, config)
            report.items_refined += 1
            for replacement, rating in replacements:
                self.store.add_refinement(run_id, code.code_id, text, replacement, depth + 1)
                walk(replacement, rating, text, depth + 1)

        walk(str(item.value), item.beceptivity, None, 0)
        return survivors


def _object_kind(element) -> ObjectKind:
    if element.value_kind is ValueKind.NUMERIC:
        return ObjectKind.NUMERIC
    if element.value_kind is ValueKind.BOOLEAN_LIKE or element.dictionary is not None:
        return ObjectKind.CATEGORICAL
    if element.value_kind is ValueKind.CATEGORICAL:
        return ObjectKind.CATEGORICAL
    return ObjectKind.FREE_TEXT


def _object_text(value, element) -> str:
    if element.value_kind is ValueKind.NUMERIC:
        return repr(float(value))
    if element.value_kind is ValueKind.BOOLEAN_LIKE:
        return str(int(value))
    return str(value)
