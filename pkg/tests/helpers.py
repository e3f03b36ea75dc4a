"""Shared builders for engine scenarios: specs, transcripts, fixtures."""

from __future__ import annotations

import json

from kgmill.engine import (
    AreYouSureConfig,
    BeceptivityConfig,
    RelationshipSpec,
    beceptivity_requery_prompt,
    build_groups,
    expansion_prompt,
    refinement_prompt,
)
from kgmill.llm import (
    Capabilities,
    PromptTemplate,
    ReplayProvider,
    ResponseSchema,
    SchemaElement,
    Transcript,
    render_prompt,
)

STRUCTURED = Capabilities(structured_output=True)


def simple_spec(
    predicate="has_complication_of",
    template="What are the complications of <<<concept>>>?",
    multi=False,
    **kwargs,
) -> RelationshipSpec:
    elements = kwargs.pop("elements", None)
    if elements is None:
        elements = (SchemaElement(
            "answer",
            multi_response=multi,
            beceptivity_requested=kwargs.get("beceptivity", BeceptivityConfig()).method == "inline",
        ),)
    return RelationshipSpec(
        predicate=predicate,
        template=PromptTemplate(template),
        schema=ResponseSchema(elements),
        **kwargs,
    )


class ScenarioTranscript:
    """Builds a transcript against the exact prompts the engine will render."""

    def __init__(self, capabilities: Capabilities = STRUCTURED):
        self.transcript = Transcript()
        self.capabilities = capabilities

    def record_item(self, specs, grouping, group_index, concept, payload: dict,
                    prompt_tokens=100, completion_tokens=50):
        group = build_groups(list(specs), grouping)[group_index]
        prompt = render_prompt(
            group.template, concept, group.combined_schema(), self.capabilities
        )
        self.transcript.add(
            prompt, json.dumps(payload), prompt_tokens, completion_tokens
        )
        return prompt

    def record_requery(self, text, scale_max, value,
                       prompt_tokens=20, completion_tokens=5):
        self.transcript.add(
            beceptivity_requery_prompt(text, scale_max), str(value),
            prompt_tokens, completion_tokens,
        )

    def record_refinement(self, item, concept, scale_max, replacements,
                          prompt_tokens=30, completion_tokens=20):
        self.transcript.add(
            refinement_prompt(item, concept, scale_max), "|".join(replacements),
            prompt_tokens, completion_tokens,
        )

    def record_expansion(self, text, style, generated,
                         prompt_tokens=25, completion_tokens=15):
        self.transcript.add(
            expansion_prompt(text, style), "|".join(generated),
            prompt_tokens, completion_tokens,
        )

    def provider(self, **kwargs) -> ReplayProvider:
        return ReplayProvider(self.transcript, capabilities=self.capabilities, **kwargs)


# -- end-to-end workflow shared by service tests and the acceptance suite ----

WORKFLOW_ROWS = [
    ("D1", "myocardial infarction", 0),
    ("D1", "heart attack", 1),
    ("D2", "urinary tract infection", 0),
    ("D3", "pneumonia", 0),
]

WORKFLOW_RUN_CONFIG = {
    "code_set": "all-terms",
    "relationships": [
        {
            "predicate": "has_complication_of",
            "template": "What are the complications of <<<concept>>>?",
            "elements": [
                {"name": "answer", "value_kind": "free_text", "multi_response": True}
            ],
        }
    ],
    "budget": {
        "price_per_prompt_token": "0.001",
        "price_per_completion_token": "0.001",
    },
}

WORKFLOW_CONCEPTS = ("myocardial infarction", "urinary tract infection", "pneumonia")


def build_workflow_transcript(path):
    """Transcript answering the workflow run config for every concept."""
    from kgmill.engine.runconfig import parse_run_plan

    scenario = ScenarioTranscript()
    plan = parse_run_plan(WORKFLOW_RUN_CONFIG)
    for concept in WORKFLOW_CONCEPTS:
        scenario.record_item(plan.specs, None, 0, concept,
                             {"answer": [f"{concept} finding", "shared finding"]})
    scenario.transcript.save(path)
    return scenario


def drive_cli_workflow(tmp_path, store_path):
    """import -> code set -> run -> per-string match, all via the CLI."""
    import yaml
    from click.testing import CliRunner

    from kgmill.service.cli import main as cli_main

    rows_file = tmp_path / "rows.tsv"
    rows_file.write_text(
        "\n".join("\t".join(str(v) for v in row) for row in WORKFLOW_ROWS) + "\n",
        encoding="utf-8",
    )
    transcript = tmp_path / "transcript.jsonl"
    build_workflow_transcript(transcript)
    run_config = tmp_path / "run.yaml"
    run_config.write_text(yaml.safe_dump(WORKFLOW_RUN_CONFIG), encoding="utf-8")

    runner = CliRunner()
    base = ["--store", str(store_path)]
    steps = [
        ["import-terminology", "--name", "terms", "--file", str(rows_file)] + base,
        ["create-code-set", "--terminology", "terms", "--name", "all-terms",
         "--filter", '{"op": "all"}'] + base,
        ["run", "--run-config", str(run_config), "--provider", "replay",
         "--transcript", str(transcript),
         "--report", str(tmp_path / "report.json")] + base,
    ]
    for argv in steps:
        result = runner.invoke(cli_main, argv)
        assert result.exit_code == 0, result.output
    object_strings = sorted(
        {f"{c} finding" for c in WORKFLOW_CONCEPTS} | {"shared finding"}
    )
    for text in object_strings:
        result = runner.invoke(
            cli_main, ["match", "--string", text, "--code-set", "all-terms"] + base
        )
        assert result.exit_code == 0, result.output
    return runner


def wait_for_job(client, job_id, timeout=10.0):
    import time

    deadline = time.time() + timeout
    job = None
    while time.time() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in ("completed", "failed", "killed_budget"):
            return job
        time.sleep(0.01)
    raise AssertionError(f"job {job_id} did not finish: {job}")


def drive_http_workflow(client):
    """The same workflow as drive_cli_workflow, through the HTTP endpoints."""
    job = client.post(
        "/terminologies/import", json={"name": "terms", "rows": WORKFLOW_ROWS}
    ).json()["job"]
    assert wait_for_job(client, job)["status"] == "completed"

    job = client.post(
        "/code-sets",
        json={"terminology": "terms", "name": "all-terms", "filter": {"op": "all"}},
    ).json()["job"]
    assert wait_for_job(client, job)["status"] == "completed"

    response = client.post("/runs", json={"config": WORKFLOW_RUN_CONFIG})
    assert response.status_code == 202
    run_job = wait_for_job(client, response.json()["job"])
    run_id = int(run_job["result_ref"].split(":")[1])

    job = client.post("/matches/batch", json={"run_id": run_id}).json()["job"]
    assert wait_for_job(client, job)["status"] == "completed"
    return run_id
