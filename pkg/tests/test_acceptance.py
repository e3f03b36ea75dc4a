"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`).

Matching and aggregation are checked against independent brute-force oracles;
everything runs offline on the fixture embedder and replay providers.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import time
from collections import Counter
from contextlib import contextmanager
from decimal import Decimal

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from kgmill.embeddings import (
    EmbeddingService,
    FixtureEmbedder,
    VectorKind,
    VectorSelection,
    cosine_distance,
)
from kgmill.engine import (
    BeceptivityAssessor,
    BeceptivityConfig,
    Expander,
    ExtractionEngine,
    finalize_boolean,
    finalize_categorical_vote,
    finalize_numeric,
)
from kgmill.llm import CostLedger, ResponseDictionary, SchemaElement
from kgmill.matcher import Matcher, MatchQuery
from kgmill.service.app import create_app
from kgmill.service.cli import main as cli_main
from kgmill.service.config import AppConfig
from kgmill.service.context import AppContext
from kgmill.store import Store, export_logical
from tests.helpers import (
    ScenarioTranscript,
    build_workflow_transcript,
    drive_cli_workflow,
    drive_http_workflow,
    simple_spec,
)

EPS = 1e-9
MODEL = "fixture-16"
KINDS = ("CLS", "MEAN_POOLED", "MAX_POOLED")
ALL_KINDS = frozenset(VectorKind(k) for k in KINDS)


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL: {name}")
        raise
    print(f"PASS: {name}")


# -- shared oracle --------------------------------------------------------


def oracle_cos_dist(u, v) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return 1.0 - dot / (nu * nv)


def oracle_match(x_vectors, code_vectors, z, n):
    results = []
    for code_id, vectors in code_vectors.items():
        d = min(oracle_cos_dist(u, v) for u in x_vectors for v in vectors)
        if d < z:
            results.append((code_id, d))
    results.sort(key=lambda pair: (pair[1], pair[0]))
    return results[:n]


def plant_instance(tmp_path, seed, n_codes=50, max_vectors=10, d=16, n_queries=20):
    """A random store instance plus the raw vectors the oracle sees."""
    rng = np.random.default_rng(seed)
    store = Store(tmp_path / f"instance_{seed}.db")
    code_vectors: dict[str, list] = {}
    rows = []
    placements = []  # (text, kind, vector)
    for i in range(n_codes):
        code_id = f"C{i:03d}"
        count = int(rng.integers(1, max_vectors + 1))
        vectors = [rng.standard_normal(d).tolist() for _ in range(count)]
        code_vectors[code_id] = vectors
        n_strings = (count + 2) // 3
        for s in range(n_strings):
            rows.append((code_id, f"{code_id} string {s}", s))
        for j, vector in enumerate(vectors):
            placements.append((f"{code_id} string {j // 3}", KINDS[j % 3], vector))
    term = store.import_terminology(f"random-{seed}", rows)
    for text, kind, vector in placements:
        store.put_vector("string", text, MODEL, kind, vector)
    code_set = store.create_code_set(term.id, f"all-{seed}", {"op": "all"})

    queries = []
    for q in range(n_queries):
        text = f"query {q}"
        # One vector per string kind so nothing is embedded on demand; the
        # oracle sees exactly the same V_x the matcher gathers.
        vectors = [rng.standard_normal(d).tolist() for _ in range(3)]
        for j, vector in enumerate(vectors):
            store.put_vector("string", text, MODEL, KINDS[j], vector)
        queries.append((text, vectors))
    return store, code_set, code_vectors, queries


def fresh_matcher(store):
    return Matcher(store, EmbeddingService(store, FixtureEmbedder(model_id=MODEL, dimension=16)))


# -- criteria ----------------------------------------------------------------


class TestMatcherOracleEquivalence:
    def test_ten_random_instances(self, tmp_path):
        with criterion("matcher-oracle equivalence (10 instances, <10s)"):
            started = time.monotonic()
            selection = VectorSelection(subject_kinds=ALL_KINDS, object_kinds=ALL_KINDS)
            for seed in range(10):
                store, code_set, code_vectors, queries = plant_instance(tmp_path, seed)
                matcher = fresh_matcher(store)
                for text, x_vectors in queries:
                    got = matcher.match_string_to_codes(
                        MatchQuery(x=text, code_set_id=code_set.id,
                                   selection=selection, z=2.0, n=50)
                    )
                    want = oracle_match(x_vectors, code_vectors, z=2.0, n=50)
                    assert [c for c, _ in got.ranked] == [c for c, _ in want]
                    for (_, got_d), (_, want_d) in zip(got.ranked, want):
                        assert abs(got_d - want_d) <= EPS
                store.close()
            elapsed = time.monotonic() - started
            assert elapsed < 10.0, f"took {elapsed:.1f}s"


class TestCosineGeometry:
    def test_geometry_suite(self):
        with criterion("cosine geometry suite (10,000 random pairs)"):
            assert cosine_distance([1.0, 2.0], [1.0, 2.0]) == pytest.approx(0, abs=EPS)
            assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2, abs=EPS)
            assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1, abs=EPS)
            rng = np.random.default_rng(42)
            for _ in range(10_000):
                u = rng.standard_normal(8)
                v = rng.standard_normal(8)
                d = cosine_distance(u, v)
                assert 0.0 - EPS <= d <= 2.0 + EPS
                assert d == pytest.approx(cosine_distance(v, u), abs=EPS)
                alpha = float(rng.uniform(0.01, 100.0))
                assert cosine_distance(alpha * u, v) == pytest.approx(d, abs=1e-7)


class TestThresholdSemantics:
    def test_threshold_and_maximal_z(self, tmp_path):
        with criterion("threshold semantics: d >= z excluded; z=2 always yields a best"):
            store, code_set, code_vectors, queries = plant_instance(
                tmp_path, seed=99, n_codes=25, n_queries=10
            )
            matcher = fresh_matcher(store)
            selection = VectorSelection(subject_kinds=ALL_KINDS, object_kinds=ALL_KINDS)
            for z in (0.3, 0.7, 1.0, 1.5):
                for text, x_vectors in queries:
                    got = matcher.match_string_to_codes(
                        MatchQuery(x=text, code_set_id=code_set.id,
                                   selection=selection, z=z, n=25)
                    )
                    assert all(d < z for _, d in got.ranked)
                    included = {c for c, _ in got.ranked}
                    for code_id, vectors in code_vectors.items():
                        d = min(oracle_cos_dist(u, v)
                                for u in x_vectors for v in vectors)
                        if d >= z:
                            assert code_id not in included
            for text, _ in queries:
                got = matcher.match_string_to_codes(
                    MatchQuery(x=text, code_set_id=code_set.id,
                               selection=selection, z=2.0, n=25)
                )
                assert got.best is not None
            store.close()


class TestAggregationCorrectness:
    def test_aggregation(self):
        with criterion("aggregation: vote/boolean/average/sum vs oracles"):
            rng = np.random.default_rng(7)
            checked = 0
            while checked < 1000:
                size = int(rng.integers(1, 30))
                samples = [chr(97 + int(rng.integers(0, 5))) for _ in range(size)]
                ranked = Counter(samples).most_common()
                if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
                    continue  # needs a unique mode
                assert finalize_categorical_vote(samples) == ranked[0][0]
                checked += 1

            # Tie-breaks: exhaustive over all 2- and 3-sample cases.
            for repeat in (2, 3):
                for samples in itertools.product("abc", repeat=repeat):
                    counts = Counter(samples)
                    top = max(counts.values())
                    first = next(v for v in samples if counts[v] == top)
                    assert finalize_categorical_vote(list(samples)) == first
                for samples in itertools.product([0, 1], repeat=repeat):
                    ones = sum(samples)
                    expected = 1 if ones > repeat - ones else 0
                    assert finalize_boolean(list(samples)) == expected

            for _ in range(1000):
                size = int(rng.integers(1, 20))
                values = rng.uniform(-1e4, 1e4, size).tolist()
                assert finalize_numeric(values, "average") == pytest.approx(
                    math.fsum(values) / size, rel=1e-12
                )
                assert finalize_numeric(values, "sum") == pytest.approx(
                    math.fsum(values), rel=1e-12
                )


class TestBudgetKill:
    def test_kill_switch(self, tmp_path):
        with criterion("budget kill: killed_budget, bounded overshoot, no post-kill calls"):
            store = Store(tmp_path / "kill.db")
            store.import_terminology("terms", [
                (f"D{i}", f"condition {i}", 0) for i in range(6)
            ])
            term = store.find_terminology("terms")
            code_set = store.create_code_set(term.id, "all", {"op": "all"})
            embedding = EmbeddingService(store, FixtureEmbedder(dimension=8))
            spec = simple_spec()
            scenario = ScenarioTranscript()
            for i in range(6):
                scenario.record_item([spec], None, 0, f"condition {i}",
                                     {"answer": f"finding {i}"},
                                     prompt_tokens=100, completion_tokens=50)
            provider = scenario.provider()
            engine = ExtractionEngine(store, provider, embedding, retry_backoff=0.001)
            # 0.15 per response; the limit is crossed on response 4 of 6.
            ledger = CostLedger("0.001", "0.001", "0.50")
            report = engine.run_population(code_set.id, [spec], ledger=ledger)
            assert report.status == "killed_budget"
            assert provider.calls == 4  # nothing dispatched after the kill
            max_response_cost = Decimal("0.15")
            assert ledger.accumulated_cost < Decimal("0.50") + max_response_cost
            assert report.triples_written == 3  # partial results retained
            store.close()


class TestDeterminism:
    def test_end_to_end_byte_identical_exports(self, tmp_path):
        with criterion("determinism: byte-identical store exports across two runs"):
            def build(tag: str) -> str:
                base = tmp_path / tag
                base.mkdir()
                drive_cli_workflow(base, base / "store.db")
                store = Store(base / "store.db")
                out = export_logical(store)
                store.close()
                return out

            assert build("one") == build("two")


class TestCaches:
    def test_second_calls_are_free(self, tmp_path):
        with criterion("caches: expansion, requery rating, embedding all hit on 2nd call"):
            store = Store(tmp_path / "cache.db")
            embedder = FixtureEmbedder(dimension=8)
            embedding = EmbeddingService(store, embedder)

            scenario = ScenarioTranscript()
            scenario.record_expansion("fracture of finger", "simple",
                                      ["broken finger", "finger fracture"])
            scenario.record_requery("antibiotics", 10, 2)
            provider = scenario.provider()

            expander = Expander(store, provider, embedding)
            expander.expand_string("fracture of finger", "simple")
            calls = provider.calls
            expander.expand_string("fracture of finger", "simple")
            assert provider.calls == calls  # zero provider calls

            assessor = BeceptivityAssessor(store, provider)
            config = BeceptivityConfig(method="requery")
            assessor.assess("antibiotics", "uti", config)
            calls = provider.calls
            assessor.assess("antibiotics", "staph", config)
            assert provider.calls == calls  # zero provider calls

            embedding.embed_string("some phrase")
            embed_calls = embedder.calls
            embedding.embed_string("some phrase")
            assert embedder.calls == embed_calls  # zero embedder calls
            store.close()


class TestBeceptivityEnforcement:
    def test_enforcement_and_chains(self, tmp_path):
        with criterion("beceptivity: no under-threshold objects; chains bounded; "
                       "concept-specific replacements"):
            store = Store(tmp_path / "becept.db")
            store.import_terminology("terms", [
                ("D2", "urinary tract infection", 0),
                ("D3", "staph skin infection", 0),
            ])
            term = store.find_terminology("terms")
            code_set = store.create_code_set(term.id, "infections", {"op": "all"})
            embedding = EmbeddingService(store, FixtureEmbedder(dimension=8))

            config = BeceptivityConfig(method="requery", min_required=6,
                                       scale_max=10, max_refinement_depth=2)
            spec = simple_spec(
                predicate="treated_by_medication",
                template="What are the medications used to treat <<<concept>>>?",
                multi=True,
                beceptivity=config,
            )
            scenario = ScenarioTranscript()
            scenario.record_item([spec], None, 0, "urinary tract infection",
                                 {"answer": ["nitrofurantoin", "antibiotics"]})
            scenario.record_item([spec], None, 0, "staph skin infection",
                                 {"answer": ["antibiotics"]})
            scenario.record_requery("nitrofurantoin", 10, 9)
            scenario.record_requery("antibiotics", 10, 2)
            scenario.record_refinement("antibiotics", "urinary tract infection", 10,
                                       ["nitrofurantoin", "trimethoprim-sulfamethoxazole"])
            scenario.record_refinement("antibiotics", "staph skin infection", 10,
                                       ["cephalexin", "dicloxacillin"])
            scenario.record_requery("trimethoprim-sulfamethoxazole", 10, 9)
            scenario.record_requery("cephalexin", 10, 8)
            scenario.record_requery("dicloxacillin", 10, 8)

            engine = ExtractionEngine(store, scenario.provider(), embedding,
                                      retry_backoff=0.001)
            report = engine.run_population(code_set.id, [spec])

            triples = store.triples_for_run(report.run_id)
            assessments = {
                text: value
                for text, _, value in store.read_rows(
                    "SELECT text, method, value FROM beceptivity_cache"
                )
            }
            # Scan triples x assessments: nothing stored under the threshold.
            for t in triples:
                if t.object_value in assessments:
                    assert assessments[t.object_value] >= config.min_required

            # Every replaced_parent chain terminates within the depth budget.
            refname = store.refinements_for_run(report.run_id)
            parent_of = {
                (r["subject"], r["child"]): r["parent"] for r in refname
            }
            for t in triples:
                if t.replaced_parent is None:
                    continue
                steps = 0
                cursor = t.object_value
                while (t.subject_code_id, cursor) in parent_of:
                    cursor = parent_of[(t.subject_code_id, cursor)]
                    steps += 1
                    assert steps <= config.max_refinement_depth
                assert steps >= 1  # the chain reached an original response item

            # The shared under-specific answer resolved differently per concept.
            uti = {t.object_value for t in triples if t.subject_code_id == "D2"}
            staph = {t.object_value for t in triples if t.subject_code_id == "D3"}
            assert "antibiotics" not in uti | staph
            assert uti & staph == set()
            assert staph == {"cephalexin", "dicloxacillin"}
            store.close()


class TestNoWriteAndKeyUnmapped:
    def test_no_write_and_unmapped_keys(self, tmp_path):
        with criterion("no_write never stored; KeyUnmapped yields no triple and is counted"):
            store = Store(tmp_path / "nw.db")
            store.import_terminology("terms", [
                ("D1", "first condition", 0), ("D2", "second condition", 0),
            ])
            term = store.find_terminology("terms")
            code_set = store.create_code_set(term.id, "all", {"op": "all"})
            embedding = EmbeddingService(store, FixtureEmbedder(dimension=8))

            dictionary = ResponseDictionary.from_mapping({"a": "common", "b": "rare"})
            spec = simple_spec(
                predicate="has_frequency",
                template="How common is <<<concept>>>?",
                elements=(
                    SchemaElement("reasoning", no_write=True),
                    SchemaElement("answer", dictionary=dictionary),
                ),
            )
            scenario = ScenarioTranscript()
            scenario.record_item([spec], None, 0, "first condition",
                                 {"reasoning": "NO-WRITE-MARKER", "answer": "a"})
            scenario.record_item([spec], None, 0, "second condition",
                                 {"reasoning": "NO-WRITE-MARKER", "answer": "zzz"})
            engine = ExtractionEngine(store, scenario.provider(), embedding,
                                      retry_backoff=0.001)
            report = engine.run_population(code_set.id, [spec])

            rows = store.read_rows(
                "SELECT subject_code_id, predicate, object_value, replaced_parent FROM triples"
            )
            assert all("NO-WRITE-MARKER" not in json.dumps(r) for r in rows)
            assert report.key_unmapped == 1
            assert len(rows) == 1  # the unmapped response produced no triple
            assert rows[0][2] == "common"
            store.close()


class TestCliHttpParity:
    def test_parity_hashes(self, tmp_path):
        with criterion("CLI/HTTP parity: identical logical export hashes"):
            cli_tmp = tmp_path / "cli"
            cli_tmp.mkdir()
            drive_cli_workflow(cli_tmp, cli_tmp / "store.db")
            runner = CliRunner()
            result = runner.invoke(cli_main, [
                "export", "--out", str(cli_tmp / "export.json"),
                "--store", str(cli_tmp / "store.db"),
            ])
            assert result.exit_code == 0
            cli_hash = hashlib.sha256(
                (cli_tmp / "export.json").read_bytes()
            ).hexdigest()

            http_tmp = tmp_path / "http"
            http_tmp.mkdir()
            transcript_path = http_tmp / "transcript.jsonl"
            build_workflow_transcript(transcript_path)
            config = AppConfig(store_path=str(http_tmp / "store.db"),
                               transcript=str(transcript_path),
                               reports_dir=str(http_tmp / "reports"))
            context = AppContext(config)
            client = TestClient(create_app(context))
            try:
                drive_http_workflow(client)
                http_hash = hashlib.sha256(
                    client.get("/export").text.encode("utf-8")
                ).hexdigest()
            finally:
                context.close()
            assert cli_hash == http_hash
