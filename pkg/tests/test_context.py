"""Application-context wiring: import triggers embedding, code-set creation
triggers expansion generation, plugin loading, and concurrency contracts."""

from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgmill.engine import ExtractionEngine
from kgmill.errors import ConfigError, NotFound
from kgmill.llm import CostLedger, TokenUsage
from kgmill.service.config import AppConfig, load_app_config
from kgmill.service.context import AppContext
from kgmill.store import RunStatus, Store, Triple
from tests.helpers import ScenarioTranscript, simple_spec


@pytest.fixture()
def context(tmp_path):
    ctx = AppContext(AppConfig(store_path=str(tmp_path / "ctx.db"),
                               embedder_dim=8))
    yield ctx
    ctx.close()


class TestContextWorkflows:
    def test_import_embeds_each_distinct_string_once(self, context):
        rows = [
            ("C1", "alpha", 0), ("C1", "beta", 1),
            ("C2", "beta", 0),  # repeated text across codes
            ("C2", "gamma", 1),
        ]
        context.import_terminology("t", rows)
        assert context.embedder.calls == 3  # alpha, beta, gamma

    def test_code_set_creation_expands_main_strings(self, tmp_path):
        scenario = ScenarioTranscript()
        scenario.record_expansion("alpha", "simple", ["plain alpha"])
        scenario.record_expansion("gamma", "simple", ["plain gamma"])
        transcript = tmp_path / "t.jsonl"
        scenario.transcript.save(transcript)
        ctx = AppContext(AppConfig(store_path=str(tmp_path / "x.db"),
                                   transcript=str(transcript), embedder_dim=8))
        try:
            ctx.import_terminology("t", [("C1", "alpha", 0), ("C2", "gamma", 0)])
            code_set = ctx.create_code_set("t", "all", {"op": "all"},
                                           expansion_style="simple")
            assert code_set.expansion_style == "simple"
            model = ctx.embedder.model_id
            assert ctx.store.get_expansion("alpha", "simple", model) == ["plain alpha"]
            assert ctx.store.get_expansion("gamma", "simple", model) == ["plain gamma"]
        finally:
            ctx.close()

    def test_unknown_code_set_reference(self, context):
        with pytest.raises(NotFound):
            context.resolve_code_set("missing")

    def test_bad_plugin_path(self, tmp_path):
        config = AppConfig(store_path=str(tmp_path / "p.db"),
                           provider="not.a.module:thing")
        with pytest.raises(ConfigError):
            AppContext(config)


class TestAppConfig:
    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "app.yaml"
        path.write_text("store_path: from_file.db\nport: 1111\n", encoding="utf-8")
        config = load_app_config(path, env={"KGMILL_STORE_PATH": "from_env.db"})
        assert config.store_path == "from_env.db"
        assert config.port == 1111

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "app.yaml"
        path.write_text("no_such_key: 1\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_app_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_app_config(tmp_path / "absent.yaml")


class TestConcurrency:
    def test_worker_pool_matches_sequential_content(self, tmp_path):
        def build(tag, workers):
            store = Store(tmp_path / f"{tag}.db")
            store.import_terminology("terms", [
                (f"D{i}", f"condition {i}", 0) for i in range(8)
            ])
            term = store.find_terminology("terms")
            code_set = store.create_code_set(term.id, "all", {"op": "all"})
            from kgmill.embeddings import EmbeddingService, FixtureEmbedder
            embedding = EmbeddingService(store, FixtureEmbedder(dimension=8))
            spec = simple_spec()
            scenario = ScenarioTranscript()
            for i in range(8):
                scenario.record_item([spec], None, 0, f"condition {i}",
                                     {"answer": f"finding {i}"})
            engine = ExtractionEngine(store, scenario.provider(), embedding,
                                      worker_count=workers, retry_backoff=0.001)
            report = engine.run_population(code_set.id, [spec])
            triples = {
                (t.subject_code_id, t.predicate, t.object_value)
                for t in store.triples_for_run(report.run_id)
            }
            store.close()
            return triples

        assert build("seq", 1) == build("par", 4)

    def test_cross_run_parallel_writes(self, tmp_path):
        store = Store(tmp_path / "cross.db")
        store.import_terminology("t", [("C1", "alpha", 0)])
        term = store.find_terminology("t")
        code_set = store.create_code_set(term.id, "all", {"op": "all"})
        runs = []
        for _ in range(4):
            run = store.create_run(code_set.id, ["p"])
            store.set_run_status(run.id, RunStatus.RUNNING)
            runs.append(run)

        errors = []
        def writer(run_id):
            try:
                for i in range(20):
                    store.insert_triples(run_id, [Triple("C1", "p", f"value {i}")])
            except Exception as exc:
                errors.append(exc)

        threads = [threading.Thread(target=writer, args=(r.id,)) for r in runs]
        for t in threads: t.start()
        for t in threads: t.join()
        assert not errors
        for run in runs:
            assert len(store.triples_for_run(run.id)) == 20
        store.close()

    def test_ledger_is_linearizable(self):
        ledger = CostLedger("1", "0", None)
        threads = [
            threading.Thread(target=lambda: [ledger.record(TokenUsage(1, 0))
                                             for _ in range(200)])
            for _ in range(8)
        ]
        for t in threads: t.start()
        for t in threads: t.join()
        assert ledger.prompt_tokens == 1600


class TestBudgetOvershootProperty:
    @given(st.lists(st.tuples(st.integers(0, 500), st.integers(0, 500)),
                    min_size=1, max_size=40))
    @settings(max_examples=100)
    def test_kill_overshoot_bounded_by_one_response(self, usages):
        from decimal import Decimal
        price = Decimal("0.001")
        limit = Decimal("0.30")
        ledger = CostLedger(price, price, limit)
        max_response_cost = Decimal("0")
        for prompt_tokens, completion_tokens in usages:
            cost = price * (prompt_tokens + completion_tokens)
            max_response_cost = max(max_response_cost, cost)
            decision = ledger.record(TokenUsage(prompt_tokens, completion_tokens))
            if decision == "kill":
                break
        if ledger.killed:
            assert ledger.accumulated_cost < limit + max_response_cost
