from __future__ import annotations

import json
from decimal import Decimal

import pytest

from kgmill.embeddings import EmbeddingService, FixtureEmbedder
from kgmill.engine import (
    AreYouSureConfig,
    BeceptivityAssessor,
    BeceptivityConfig,
    Expander,
    ExtractionEngine,
    RelationshipSpec,
    parse_rating,
)
from kgmill.errors import AssessmentError, ExpansionError
from kgmill.llm import (
    CostLedger,
    PromptTemplate,
    ResponseDictionary,
    ResponseSchema,
    SchemaElement,
    ValueKind,
)
from kgmill.store import RunStatus, Store
from tests.helpers import ScenarioTranscript, simple_spec


@pytest.fixture()
def clinical_store(tmp_path):
    store = Store(tmp_path / "clinical.db")
    store.import_terminology("terms", [
        ("D1", "myocardial infarction", 0),
        ("D2", "urinary tract infection", 0),
        ("D3", "staph skin infection", 0),
        ("D4", "pneumonia", 0),
    ])
    yield store
    store.close()


@pytest.fixture()
def clinical(clinical_store):
    term = clinical_store.find_terminology("terms")
    code_set = clinical_store.create_code_set(term.id, "all", {"op": "all"})
    embedding = EmbeddingService(clinical_store, FixtureEmbedder(dimension=8))
    return clinical_store, code_set, embedding


def make_engine(store, provider, embedding, **kwargs):
    return ExtractionEngine(store, provider, embedding, retry_backoff=0.001, **kwargs)


class TestBasicRun:
    def test_single_concept_single_triple(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec()
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept,
                                 {"answer": "congestive heart failure"})
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        assert report.status == "completed"
        assert report.triples_written == 4
        triples = store.triples_for_run(report.run_id)
        assert ("D1", "has_complication_of", "congestive heart failure") in [
            (t.subject_code_id, t.predicate, t.object_value) for t in triples
        ]

    def test_empty_code_set_completes(self, clinical):
        store, _, embedding = clinical
        term = store.find_terminology("terms")
        empty = store.create_code_set(
            term.id, "empty", {"field": "code_id", "op": "prefix", "value": "Z"}
        )
        engine = make_engine(store, ScenarioTranscript().provider(), embedding)
        report = engine.run_population(empty.id, [simple_spec()])
        assert report.status == "completed"
        assert report.triples_written == 0

    def test_multi_response_yields_one_triple_per_item(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec(multi=True)
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept,
                                 {"answer": ["congestive heart failure", "shock"]})
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        assert report.triples_written == 8

    def test_deterministic_repeat_runs(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec(multi=True)
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept,
                                 {"answer": ["a finding", "another finding"]})
        engine = make_engine(store, scenario.provider(), embedding)
        first = engine.run_population(code_set.id, [spec])
        second = engine.run_population(code_set.id, [spec])
        assert store.triples_for_run(first.run_id) == store.triples_for_run(second.run_id)


class TestGroupedSpecs:
    def test_severity_proportions_in_one_prompt(self, clinical):
        store, code_set, embedding = clinical
        template = ("For the condition at the end, give the proportion of mild, "
                    "moderate, and severe courses: <<<concept>>>")
        specs = [
            RelationshipSpec(
                predicate=f"severity_{level}_proportion",
                template=PromptTemplate(template),
                schema=ResponseSchema((SchemaElement(level, value_kind=ValueKind.NUMERIC),)),
            )
            for level in ("mild", "moderate", "severe")
        ]
        grouping = [[0, 1, 2]]
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item(specs, grouping, 0, concept,
                                 {"mild": 70, "moderate": 20, "severe": 10})
        provider = scenario.provider()
        engine = make_engine(store, provider, embedding)
        report = engine.run_population(code_set.id, specs, grouping=grouping)
        assert report.triples_written == 12
        assert provider.calls == 4  # one prompt per concept, three triples each
        d1 = [t for t in store.triples_for_run(report.run_id) if t.subject_code_id == "D1"]
        assert {(t.predicate, t.object_value) for t in d1} == {
            ("severity_mild_proportion", "70.0"),
            ("severity_moderate_proportion", "20.0"),
            ("severity_severe_proportion", "10.0"),
        }


class TestAreYouSure:
    def test_vote_samples_and_finalizes(self, clinical):
        store, code_set, embedding = clinical
        dictionary = ResponseDictionary.from_mapping({"a": "common", "b": "rare"})
        spec = simple_spec(
            predicate="has_frequency",
            template="How common is <<<concept>>>?",
            elements=(SchemaElement("answer", dictionary=dictionary),),
            are_you_sure=AreYouSureConfig(mode="vote", repeats=3),
        )
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept, {"answer": "a"})
        provider = scenario.provider()
        engine = make_engine(store, provider, embedding)
        report = engine.run_population(code_set.id, [spec])
        assert provider.calls == 12  # 3 samples x 4 concepts
        triples = store.triples_for_run(report.run_id)
        assert all(t.object_value == "common" for t in triples)
        assert all(t.finalization.value == "vote" for t in triples)

    def test_numeric_average(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec(
            predicate="mortality_percent",
            template="What percent die of <<<concept>>>?",
            elements=(SchemaElement("answer", value_kind=ValueKind.NUMERIC),),
            are_you_sure=AreYouSureConfig(mode="average", repeats=2),
        )
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept, {"answer": 12})
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        triples = store.triples_for_run(report.run_id)
        assert all(t.object_value == "12.0" for t in triples)
        assert all(t.finalization.value == "average" for t in triples)


class TestNoWriteAndDictionary:
    def test_no_write_elements_never_persisted(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec(elements=(
            SchemaElement("reasoning", no_write=True),
            SchemaElement("answer"),
        ))
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept,
                                 {"reasoning": "SECRET-REASONING", "answer": "a finding"})
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        rows = store.read_rows("SELECT object_value, replaced_parent FROM triples")
        assert all("SECRET-REASONING" not in json.dumps(row) for row in rows)
        assert report.triples_written == 4

    def test_unknown_dictionary_key_counted_no_triple(self, clinical):
        store, code_set, embedding = clinical
        dictionary = ResponseDictionary.from_mapping({"a": "common", "b": "rare"})
        spec = simple_spec(
            predicate="has_frequency",
            template="How common is <<<concept>>>?",
            elements=(SchemaElement("answer", dictionary=dictionary),),
        )
        scenario = ScenarioTranscript()
        concepts = ("myocardial infarction", "urinary tract infection",
                    "staph skin infection", "pneumonia")
        for i, concept in enumerate(concepts):
            answer = "z" if i < 2 else "b"
            scenario.record_item([spec], None, 0, concept, {"answer": answer})
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        assert report.key_unmapped == 2
        assert report.triples_written == 2
        triples = store.triples_for_run(report.run_id)
        assert all(t.object_value == "rare" for t in triples)


class TestBudgetKill:
    def test_mid_run_kill(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec()
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept, {"answer": "x finding"},
                                 prompt_tokens=100, completion_tokens=50)
        provider = scenario.provider()
        engine = make_engine(store, provider, embedding)
        # 0.15 per item; limit 0.40 -> kill fires on the third response.
        ledger = CostLedger("0.001", "0.001", "0.40")
        report = engine.run_population(code_set.id, [spec], ledger=ledger)
        assert report.status == "killed_budget"
        assert store.get_run(report.run_id).status is RunStatus.KILLED_BUDGET
        assert provider.calls == 3  # no post-kill provider calls
        assert report.triples_written == 2  # partial results retained
        assert report.items_killed == 2  # the in-flight item and the skipped one
        # Overshoot bound: strictly under limit + one maximal response.
        assert ledger.accumulated_cost < Decimal("0.40") + Decimal("0.15")

    def test_provider_failure_marks_item_and_continues(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec()
        scenario = ScenarioTranscript()
        concepts = ("myocardial infarction", "urinary tract infection",
                    "staph skin infection", "pneumonia")
        for concept in concepts[1:]:
            scenario.record_item([spec], None, 0, concept, {"answer": "f"})
        # D1's prompt is absent from the transcript -> UnknownPrompt (hard failure).
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        assert report.status == "completed"
        assert report.items_failed == 1
        assert report.triples_written == 3


class TestBeceptivity:
    def uti_staph_scenario(self, store, embedding):
        """The shared under-specific 'antibiotics' answer across two concepts."""
        term = store.find_terminology("terms")
        code_set = store.create_code_set(
            term.id, "infections",
            {"field": "code_id", "op": "in", "values": ["D2", "D3"]},
        )
        config = BeceptivityConfig(method="requery", min_required=6, scale_max=10,
                                   max_refinement_depth=2)
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
        scenario.record_refinement(
            "antibiotics", "urinary tract infection", 10,
            ["nitrofurantoin", "trimethoprim-sulfamethoxazole"],
        )
        scenario.record_refinement(
            "antibiotics", "staph skin infection", 10,
            ["cephalexin", "dicloxacillin"],
        )
        scenario.record_requery("trimethoprim-sulfamethoxazole", 10, 9)
        scenario.record_requery("cephalexin", 10, 8)
        scenario.record_requery("dicloxacillin", 10, 8)
        return code_set, spec, scenario

    def test_underbeceptive_replaced_not_stored(self, clinical):
        store, _, embedding = clinical
        code_set, spec, scenario = self.uti_staph_scenario(store, embedding)
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        triples = store.triples_for_run(report.run_id)
        objects = {t.object_value for t in triples}
        assert "antibiotics" not in objects
        assert report.items_refined == 2

        d2 = {t.object_value: t for t in triples if t.subject_code_id == "D2"}
        assert set(d2) == {"nitrofurantoin", "trimethoprim-sulfamethoxazole"}
        assert d2["trimethoprim-sulfamethoxazole"].replaced_parent == "antibiotics"

        # Replacements are concept-specific: staph got different medications.
        d3 = {t.object_value for t in triples if t.subject_code_id == "D3"}
        assert d3 == {"cephalexin", "dicloxacillin"}

    def test_magnitude_cached_across_concepts(self, clinical):
        store, _, embedding = clinical
        code_set, spec, scenario = self.uti_staph_scenario(store, embedding)
        provider = scenario.provider()
        engine = make_engine(store, provider, embedding)
        engine.run_population(code_set.id, [spec])
        # 'antibiotics' was rated once even though both concepts returned it:
        # 2 item prompts + 5 distinct rating prompts + 2 refinements = 9 calls.
        assert provider.calls == 9

    def test_assessment_cache_zero_calls_on_second_use(self, clinical):
        store, _, embedding = clinical
        scenario = ScenarioTranscript()
        scenario.record_requery("antibiotics", 10, 2)
        provider = scenario.provider()
        assessor = BeceptivityAssessor(store, provider)
        config = BeceptivityConfig(method="requery")
        first = assessor.assess("antibiotics", "anything", config)
        assert first.value == 2
        assert provider.calls == 1
        second = assessor.assess("antibiotics", "anything else", config)
        assert second.value == 2
        assert provider.calls == 1  # served from the store cache

    def test_depth_exhaustion_drops_item(self, clinical):
        store, _, embedding = clinical
        term = store.find_terminology("terms")
        code_set = store.create_code_set(
            term.id, "one", {"field": "code_id", "op": "eq", "value": "D2"}
        )
        config = BeceptivityConfig(method="requery", min_required=6,
                                   max_refinement_depth=1)
        spec = simple_spec(
            predicate="treated_by_medication",
            template="What treats <<<concept>>>?",
            multi=True,
            beceptivity=config,
        )
        scenario = ScenarioTranscript()
        scenario.record_item([spec], None, 0, "urinary tract infection",
                             {"answer": ["antibiotics"]})
        scenario.record_requery("antibiotics", 10, 2)
        scenario.record_refinement("antibiotics", "urinary tract infection", 10,
                                   ["medicines"])
        scenario.record_requery("medicines", 10, 1)
        engine = make_engine(store, scenario.provider(), embedding)
        report = engine.run_population(code_set.id, [spec])
        assert report.triples_written == 0
        assert report.items_dropped == 1
        assert report.items_refined == 1

    def test_db_lookup_depth_scaling(self, clinical):
        store, _, embedding = clinical
        # Three-level tree: root -> mid -> leaf (depths 0, 1, 2, 3).
        store.load_hierarchy([
            ("medication", None),
            ("antibiotic", "medication"),
            ("penicillin class", "antibiotic"),
            ("amoxicillin", "penicillin class"),
        ])
        assessor = BeceptivityAssessor(store, ScenarioTranscript().provider())
        config = BeceptivityConfig(method="db_lookup", scale_max=10)
        # Leaf at max depth earns the full scale; by-hand oracle 3/3*10 = 10.
        assert assessor.assess("amoxicillin", "x", config).value == 10
        assert assessor.assess("antibiotic", "x", config).value == pytest.approx(10 / 3)
        assert assessor.assess("medication", "x", config).value == 0
        with pytest.raises(AssessmentError):
            assessor.assess("not in tree", "x", config)

    def test_inline_ratings_from_same_response(self, clinical):
        store, _, embedding = clinical
        term = store.find_terminology("terms")
        code_set = store.create_code_set(
            term.id, "one-uti", {"field": "code_id", "op": "eq", "value": "D2"}
        )
        config = BeceptivityConfig(method="inline", min_required=6, scale_max=10)
        spec = simple_spec(
            predicate="treated_by_medication",
            template="What treats <<<concept>>>?",
            elements=(SchemaElement("answer", multi_response=True,
                                    beceptivity_requested=True),),
            beceptivity=config,
        )
        scenario = ScenarioTranscript()
        scenario.record_item([spec], None, 0, "urinary tract infection", {
            "answer": [
                {"value": "nitrofurantoin", "beceptivity": 9},
                {"value": "antibiotics", "beceptivity": 2},
            ]
        })
        scenario.record_refinement(
            "antibiotics", "urinary tract infection", 10,
            ["fosfomycin :: 9"],
        )
        provider = scenario.provider()
        engine = make_engine(store, provider, embedding)
        report = engine.run_population(code_set.id, [spec])
        objects = {t.object_value for t in store.triples_for_run(report.run_id)}
        assert objects == {"nitrofurantoin", "fosfomycin"}
        assert provider.calls == 2  # the item plus one refinement, no rating queries

    def test_parse_rating_clamps(self):
        assert parse_rating("7", 10) == 7
        assert parse_rating("rating: 15", 10) == 10
        assert parse_rating("-3", 10) == 0
        with pytest.raises(AssessmentError):
            parse_rating("no number", 10)


class TestExpansion:
    def test_expansion_generated_embedded_cached(self, clinical):
        store, _, embedding = clinical
        scenario = ScenarioTranscript()
        scenario.record_expansion(
            "fracture of an unspecified upper extremity digit", "simple",
            ["broken finger", "finger fracture"],
        )
        provider = scenario.provider()
        expander = Expander(store, provider, embedding)
        result = expander.expand_string(
            "fracture of an unspecified upper extremity digit", "simple"
        )
        assert result.generated_texts == ("broken finger", "finger fracture")
        assert provider.calls == 1
        again = expander.expand_string(
            "fracture of an unspecified upper extremity digit", "simple"
        )
        assert again == result
        assert provider.calls == 1  # cache hit, zero provider calls
        summary = store.get_vector(
            "expansion_set",
            "simple|fracture of an unspecified upper extremity digit",
            embedding.embedder.model_id, "SUMMARY",
        )
        assert summary is not None

    def test_empty_style_rejected(self, clinical):
        store, _, embedding = clinical
        expander = Expander(store, ScenarioTranscript().provider(), embedding)
        with pytest.raises(ValueError):
            expander.expand_string("text", "")

    def test_provider_failure_is_expansion_error(self, clinical):
        store, _, embedding = clinical
        expander = Expander(store, ScenarioTranscript().provider(), embedding)
        with pytest.raises(ExpansionError):
            expander.expand_string("unrecorded text", "simple")

    def test_run_generates_expansions_for_objects(self, clinical):
        store, code_set, embedding = clinical
        spec = simple_spec(object_expansion_styles=("simple",))
        scenario = ScenarioTranscript()
        for concept in ("myocardial infarction", "urinary tract infection",
                        "staph skin infection", "pneumonia"):
            scenario.record_item([spec], None, 0, concept, {"answer": "heart failure"})
        scenario.record_expansion("heart failure", "simple",
                                  ["weak heart", "failing heart"])
        engine = make_engine(store, scenario.provider(), embedding)
        engine.run_population(code_set.id, [spec])
        assert store.get_expansion("heart failure", "simple",
                                   embedding.embedder.model_id) is not None
