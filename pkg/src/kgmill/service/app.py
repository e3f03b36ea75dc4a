"""HTTP service exposing every workflow: terminology import, code sets,
relationship runs, matching, custom tables, jobs, and annotations.

Long operations return 202 with a job id; progress is polled at /jobs/{id}.
Mutations accept an Idempotency-Key header for safe retries. The UI's static
assets are served from the frontend build directory when present.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from kgmill.engine.runconfig import parse_run_plan
from kgmill.errors import KgmillError, NotFound, QueryError
from kgmill.service.context import AppContext
from kgmill.service.jobs import JobRunner, run_terminal_status
from kgmill.store.models import RunStatus


class ImportRequest(BaseModel):
    name: str
    rows: list[tuple[str, str, int]] | None = None
    rows_text: str | None = None
    delimiter: str = "\t"


class CodeSetRequest(BaseModel):
    terminology: str | int
    name: str
    filter: dict = Field(default_factory=lambda: {"op": "all"})
    expansion_style: str | None = None


class RunRequest(BaseModel):
    config: dict


class MatchBatchRequest(BaseModel):
    run_id: int
    code_set: str | int | None = None
    z: float = 2.0
    n: int = 4


class CustomTableRequest(BaseModel):
    name: str
    query: str


class AnnotationRequest(BaseModel):
    subject_kind: str
    subject_key: str
    body: str


def create_app(context: AppContext, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="kgmill", version="0.1.0")
    jobs = JobRunner(context.store)
    app.state.context = context
    app.state.jobs = jobs

    @app.exception_handler(KgmillError)
    async def domain_error(request, exc: KgmillError):
        status = 404 if isinstance(exc, NotFound) else 400
        raise HTTPException(status_code=status, detail=str(exc))

    # -- terminologies -----------------------------------------------------

    @app.post("/terminologies/import", status_code=202)
    def import_terminology(body: ImportRequest,
                           idempotency_key: str | None = Header(default=None)):
        rows = body.rows
        if rows is None and body.rows_text is not None:
            rows = [
                tuple(line.split(body.delimiter))
                for line in body.rows_text.splitlines()
                if line.strip()
            ]
        if rows is None:
            raise HTTPException(422, "either rows or rows_text is required")

        def work(progress):
            progress(0, len(rows))
            terminology = context.import_terminology(body.name, rows)
            progress(len(rows), len(rows))
            return f"terminology:{terminology.id}", "completed"

        job_id = jobs.submit("terminology_import", work, idempotency_key)
        return {"job": job_id}

    @app.get("/terminologies")
    def list_terminologies():
        return [
            {"id": tid, "name": name}
            for tid, name in context.store.list_terminologies()
        ]

    # -- code sets ------------------------------------------------------------

    @app.post("/code-sets", status_code=202)
    def create_code_set(body: CodeSetRequest,
                        idempotency_key: str | None = Header(default=None)):
        def work(progress):
            code_set = context.create_code_set(
                body.terminology, body.name, body.filter, body.expansion_style
            )
            return f"code_set:{code_set.id}", "completed"

        job_id = jobs.submit("code_set", work, idempotency_key)
        return {"job": job_id}

    @app.get("/code-sets/{code_set_id}")
    def get_code_set(code_set_id: int):
        cs = context.store.get_code_set(code_set_id)
        return {
            "id": cs.id,
            "terminology_id": cs.terminology_id,
            "name": cs.name,
            "members": sorted(cs.member_code_ids),
            "source_filter": json.loads(cs.source_filter),
            "expansion_style": cs.expansion_style,
            "warning": cs.warning,
            "version": cs.version,
        }

    # -- runs --------------------------------------------------------------------

    @app.post("/runs", status_code=202)
    def launch_run(body: RunRequest,
                   idempotency_key: str | None = Header(default=None)):
        plan = parse_run_plan(body.config)
        code_set = context.resolve_code_set(plan.code_set)

        def work(progress):
            report = context.run(plan, on_progress=progress)
            return f"run:{report.run_id}", run_terminal_status(RunStatus(report.status))

        job_id = jobs.submit("relationship_run", work, idempotency_key,
                             code_set_id=code_set.id)
        return {"job": job_id}

    @app.get("/runs/{run_id}")
    def get_run(run_id: int):
        run = context.store.get_run(run_id)
        return {
            "id": run.id,
            "code_set_id": run.code_set_id,
            "spec_ids": run.spec_ids,
            "status": run.status.value,
            "prompt_tokens": run.prompt_tokens,
            "completion_tokens": run.completion_tokens,
            "accumulated_cost": run.accumulated_cost,
        }

    @app.get("/runs/{run_id}/triples")
    def get_run_triples(run_id: int):
        return [
            {
                "subject": t.subject_code_id,
                "predicate": t.predicate,
                "object": t.object_value,
                "object_kind": t.object_kind.value,
                "finalization": t.finalization.value,
                "replaced_parent": t.replaced_parent,
            }
            for t in context.store.triples_for_run(run_id)
        ]

    # -- matching -----------------------------------------------------------------

    @app.post("/matches/batch", status_code=202)
    def match_batch(body: MatchBatchRequest,
                    idempotency_key: str | None = Header(default=None)):
        def work(progress):
            results = context.batch_match(body.run_id, body.code_set, body.z, body.n)
            return f"matches:{len(results)}", "completed"

        job_id = jobs.submit("match_batch", work, idempotency_key)
        return {"job": job_id}

    @app.get("/matches")
    def get_matches(object: str = Query(...)):
        found = context.store.matches_for_object(object)
        main_strings = _main_strings(context)
        return [
            {
                "object_string": m["object_string"],
                "code_set_id": m["code_set_id"],
                "z": m["z"],
                "n": m["n"],
                "best": m["best"],
                "ranked": [
                    {
                        "rank": i + 1,
                        "code_id": code_id,
                        "distance": distance,
                        "main_string": main_strings.get(code_id, ""),
                    }
                    for i, (code_id, distance) in enumerate(m["ranked"])
                ],
            }
            for m in found
        ]

    # -- custom tables ---------------------------------------------------------------

    @app.post("/custom-tables", status_code=202)
    def materialize(body: CustomTableRequest,
                    idempotency_key: str | None = Header(default=None)):
        def work(progress):
            try:
                table = context.materialize(body.name, body.query)
            except QueryError as exc:
                raise RuntimeError(f"query error: {exc}") from exc
            return f"custom_table:{table.name}:{table.version}", "completed"

        job_id = jobs.submit("custom_table", work, idempotency_key)
        return {"job": job_id}

    @app.get("/custom-tables/{name}")
    def read_custom_table(name: str, version: int | None = None):
        table = context.store.read_custom_table(name, version)
        return {
            "name": table.name,
            "version": table.version,
            "defining_query": table.defining_query,
            "columns": table.columns,
            "rows": table.rows,
        }

    # -- jobs, annotations, export -------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def get_job(job_id: int):
        return context.store.get_job(job_id)

    @app.post("/annotations", status_code=201)
    def add_annotation(body: AnnotationRequest):
        note_id = context.store.add_annotation(
            body.subject_kind, body.subject_key, body.body
        )
        return {"id": note_id}

    @app.get("/annotations")
    def list_annotations(subject_kind: str, subject_key: str):
        return context.store.list_annotations(subject_kind, subject_key)

    @app.get("/export", response_class=PlainTextResponse)
    def export():
        return context.export()

    # -- static UI -------------------------------------------------------------------------

    frontend = Path(frontend_dir) if frontend_dir else None
    if frontend and frontend.is_dir():
        index = frontend / "index.html"

        @app.get("/", response_class=HTMLResponse)
        def home():
            return index.read_text(encoding="utf-8")

        app.mount("/ui", StaticFiles(directory=str(frontend)), name="ui")

    return app


def _main_strings(context: AppContext) -> dict[str, str]:
    return {
        code_id: text
        for code_id, text in context.store.read_rows(
            """SELECT c.code_id, s.text FROM codes c
               JOIN term_strings s ON s.code_pk = c.id
               WHERE s.source_rank = (
                   SELECT MIN(source_rank) FROM term_strings WHERE code_pk = c.id
               )"""
        )
    }
