from __future__ import annotations

import pytest
import yaml

from kgmill.engine import load_run_plan, parse_run_plan
from kgmill.errors import ConfigError

MINIMAL = {
    "code_set": "all-terms",
    "relationships": [
        {
            "predicate": "has_complication_of",
            "template": "Complications of <<<concept>>>?",
        }
    ],
}


def test_minimal_plan_defaults(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(MINIMAL), encoding="utf-8")
    plan = load_run_plan(path)
    assert plan.code_set == "all-terms"
    assert plan.worker_count == 1
    spec = plan.specs[0]
    assert spec.predicate == "has_complication_of"
    assert spec.element.name == "answer"
    assert spec.are_you_sure.mode == "none"


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_run_plan(tmp_path / "absent.yaml")


def test_missing_placeholder_is_config_error():
    raw = dict(MINIMAL, relationships=[
        {"predicate": "p", "template": "no placeholder"}
    ])
    with pytest.raises(ConfigError):
        parse_run_plan(raw)


def test_unknown_element_keys_rejected():
    raw = dict(MINIMAL, relationships=[
        {
            "predicate": "p",
            "template": "x <<<concept>>>",
            "elements": [{"name": "answer", "bogus": 1}],
        }
    ])
    with pytest.raises(ConfigError):
        parse_run_plan(raw)


def test_inline_beceptivity_wires_rating_field():
    raw = dict(MINIMAL, relationships=[
        {
            "predicate": "p",
            "template": "x <<<concept>>>",
            "beceptivity": {"method": "inline", "min_required": 5, "scale_max": 8},
        }
    ])
    plan = parse_run_plan(raw)
    element = plan.specs[0].element
    assert element.beceptivity_requested is True
    assert element.beceptivity_scale_max == 8


def test_dictionary_and_multi_response_conflict():
    raw = dict(MINIMAL, relationships=[
        {
            "predicate": "p",
            "template": "x <<<concept>>>",
            "elements": [{
                "name": "answer", "multi_response": True,
                "dictionary": {"a": "first", "b": "second"},
            }],
        }
    ])
    with pytest.raises(ConfigError):
        parse_run_plan(raw)


def test_budget_builds_decimal_ledger():
    raw = dict(MINIMAL, budget={
        "price_per_prompt_token": "0.001",
        "price_per_completion_token": "0.002",
        "dollar_limit": "1.50",
    })
    ledger = parse_run_plan(raw).build_ledger()
    from decimal import Decimal
    assert ledger.dollar_limit == Decimal("1.50")


def test_grouping_must_be_index_lists():
    raw = dict(MINIMAL, grouping="nope")
    with pytest.raises(ConfigError):
        parse_run_plan(raw)
