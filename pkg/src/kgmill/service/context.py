"""Shared application wiring: one context drives both the CLI and the HTTP
layer, so identical inputs produce identical store contents on either path.
"""

from __future__ import annotations

import importlib
import json
import logging
from pathlib import Path

from kgmill.embeddings import EmbeddingService, FixtureEmbedder, VectorKind, VectorSelection
from kgmill.engine import Expander, ExtractionEngine, RunPlan
from kgmill.engine.runner import RunReport
from kgmill.errors import ConfigError, ExpansionError, NotFound
from kgmill.llm import ProviderOptions, Transcript, ReplayProvider
from kgmill.matcher import DEFAULT_TOP_N, Matcher, MatchQuery
from kgmill.service.config import AppConfig
from kgmill.store import Store, Terminology, export_logical

logger = logging.getLogger(__name__)


def _load_factory(dotted: str):
    module_name, _, attr = dotted.partition(":")
    if not attr:
        raise ConfigError(f"plugin path must be 'module:factory', got {dotted!r}")
    try:
        return getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load plugin {dotted!r}: {exc}")


class AppContext:
    def __init__(self, config: AppConfig):
        self.config = config
        self.store = Store(config.store_path)
        self.embedder = self._build_embedder()
        self.embedding = EmbeddingService(self.store, self.embedder)
        self.provider = self._build_provider()
        self.matcher = Matcher(self.store, self.embedding)
        self.options = ProviderOptions(
            model=config.model, temperature=config.temperature,
            max_tokens=config.max_tokens,
        )

    def close(self) -> None:
        self.store.close()

    def _build_embedder(self):
        cfg = self.config
        if cfg.embedder == "fixture":
            return FixtureEmbedder(
                model_id=cfg.embedder_model, dimension=cfg.embedder_dim,
                lookup_path=cfg.embedder_lookup,
            )
        return _load_factory(cfg.embedder)(cfg)

    def _build_provider(self):
        cfg = self.config
        if cfg.provider == "replay":
            transcript = (
                Transcript.load(cfg.transcript) if cfg.transcript else Transcript()
            )
            from kgmill.llm.providers import Capabilities
            return ReplayProvider(
                transcript, policy=cfg.provider_policy,
                capabilities=Capabilities(structured_output=cfg.structured_output),
            )
        return _load_factory(cfg.provider)(cfg)

    # -- workflows ----------------------------------------------------------

    def import_terminology(self, name: str, rows) -> Terminology:
        """Import rows and index every distinct string (vectors + summaries)."""
        terminology = self.store.import_terminology(name, rows)
        self.embedding.index_terminology(terminology)
        return terminology

    def create_code_set(self, terminology, name: str, filter_spec: dict,
                        expansion_style: str | None = None):
        if isinstance(terminology, str) and not terminology.isdigit():
            terminology_id = self.store.find_terminology(terminology).id
        else:
            terminology_id = int(terminology)
        code_set = self.store.create_code_set(
            terminology_id, name, filter_spec, expansion_style
        )
        if expansion_style:
            expander = Expander(self.store, self.provider, self.embedding,
                                options=self.options)
            for code in self.store.code_set_codes(code_set.id):
                try:
                    expander.expand_string(code.main_text, expansion_style)
                except ExpansionError as exc:
                    logger.warning("code set expansion skipped: %s", exc)
        return code_set

    def resolve_code_set(self, ref):
        if isinstance(ref, int) or (isinstance(ref, str) and ref.isdigit()):
            return self.store.get_code_set(int(ref))
        return self.store.find_code_set(str(ref))

    def run(self, plan: RunPlan, on_progress=None) -> RunReport:
        code_set = self.resolve_code_set(plan.code_set)
        engine = ExtractionEngine(
            self.store, self.provider, self.embedding,
            options=self.options, worker_count=plan.worker_count,
        )
        budget = dict(plan.budget)
        budget.setdefault("price_per_prompt_token", self.config.price_prompt)
        budget.setdefault("price_per_completion_token", self.config.price_completion)
        if self.config.dollar_limit is not None:
            budget.setdefault("dollar_limit", self.config.dollar_limit)
        ledger = RunPlan(plan.code_set, plan.specs, budget=budget).build_ledger()
        report = engine.run_population(
            code_set.id, plan.specs, grouping=plan.grouping, ledger=ledger,
            on_progress=on_progress,
        )
        self.write_report(report)
        return report

    def write_report(self, report: RunReport) -> Path:
        reports_dir = Path(self.config.reports_dir or
                           Path(self.config.store_path).parent / "reports")
        reports_dir.mkdir(parents=True, exist_ok=True)
        path = reports_dir / f"run_{report.run_id}.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True),
                        encoding="utf-8")
        log_path = reports_dir / f"run_{report.run_id}.log"
        lines = [f"run {report.run_id} finished: {report.status}"]
        lines += [f"  {key}: {value}" for key, value in sorted(report.to_dict().items())
                  if key not in ("run_id", "status")]
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def match(self, string: str, code_set_ref, n: int = DEFAULT_TOP_N,
              z: float = 2.0, subject_kinds=None, object_kinds=None,
              include_expansions: bool = False):
        code_set = self.resolve_code_set(code_set_ref)
        selection = VectorSelection(
            subject_kinds=frozenset(
                VectorKind(k) for k in (subject_kinds or ["CLS"])
            ),
            object_kinds=frozenset(
                VectorKind(k) for k in (object_kinds or ["CLS"])
            ),
            include_expansions=include_expansions,
        )
        return self.matcher.match_string_to_codes(
            MatchQuery(x=string, code_set_id=code_set.id, selection=selection,
                       z=z, n=n)
        )

    def batch_match(self, run_id: int, code_set_ref=None, z: float = 2.0,
                    n: int = DEFAULT_TOP_N):
        code_set_id = (
            self.resolve_code_set(code_set_ref).id if code_set_ref is not None else None
        )
        return self.matcher.batch_match(run_id, code_set_id=code_set_id, z=z, n=n)

    def materialize(self, name: str, query: str):
        return self.store.materialize_custom_table(name, query)

    def export(self) -> str:
        return export_logical(self.store)
