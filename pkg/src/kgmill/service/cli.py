"""Command-line interface: headless parity with the HTTP layer.

Every subcommand drives the same AppContext operations the service uses, so
CLI-built and HTTP-built stores are content-identical for identical inputs.
Failures print one machine-parseable `error: ...` line and exit 1; usage
mistakes exit 2.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from kgmill.engine.runconfig import load_run_plan
from kgmill.errors import ConfigError, KgmillError
from kgmill.matcher import write_match_review
from kgmill.service.config import load_app_config
from kgmill.service.context import AppContext


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def with_context(fn):
    @click.option("--config", "config_path", default=None,
                  help="App config file (YAML); env vars override.")
    @click.option("--store", "store_path", default=None, help="Store file path.")
    @functools.wraps(fn)
    def wrapper(config_path, store_path, **kwargs):
        try:
            config = load_app_config(config_path)
            if store_path:
                config.store_path = store_path
            context = AppContext(config)
        except KgmillError as exc:
            _fail(str(exc))
        try:
            fn(context, **kwargs)
        except KgmillError as exc:
            _fail(str(exc))
        finally:
            context.close()
    return wrapper


@click.group()
def main():
    """Populate terminology-mapped knowledge graphs from LLM queries."""


@main.command("import-terminology")
@click.option("--name", required=True)
@click.option("--file", "file_path", required=True, type=click.Path())
@click.option("--delimiter", default="\t", help="Column delimiter, default tab.")
@with_context
def import_terminology(context, name, file_path, delimiter):
    """Import code_id / string / rank rows from a delimited file."""
    path = Path(file_path)
    if not path.exists():
        _fail(f"input file not found: {path}")
    rows = [
        line.split(delimiter)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    terminology = context.import_terminology(name, rows)
    report = terminology.import_report
    click.echo(
        f"imported terminology {terminology.name!r}: "
        f"{len(terminology.codes)} codes, {report.rows_stored} strings stored, "
        f"{report.rows_rejected} rows rejected"
    )


@main.command("create-code-set")
@click.option("--terminology", required=True)
@click.option("--name", required=True)
@click.option("--filter", "filter_json", default='{"op": "all"}',
              help="Filter as JSON (see README for the filter language).")
@click.option("--filter-file", type=click.Path(), default=None)
@click.option("--expansion-style", default=None)
@with_context
def create_code_set(context, terminology, name, filter_json, filter_file,
                    expansion_style):
    """Create a code subset of a terminology from a declarative filter."""
    if filter_file:
        filter_path = Path(filter_file)
        if not filter_path.exists():
            _fail(f"filter file not found: {filter_path}")
        filter_json = filter_path.read_text(encoding="utf-8")
    try:
        filter_spec = json.loads(filter_json)
    except json.JSONDecodeError as exc:
        _fail(f"filter is not valid JSON: {exc}")
    code_set = context.create_code_set(terminology, name, filter_spec, expansion_style)
    suffix = " (warning: empty)" if code_set.warning else ""
    click.echo(f"code set {code_set.name!r}: {len(code_set.member_code_ids)} members{suffix}")


@main.command("run")
@click.option("--run-config", "--config-run", "run_config", required=True,
              type=click.Path(),
              help="Run configuration file (YAML).")
@click.option("--provider", default=None, help="Override provider (e.g. replay).")
@click.option("--transcript", default=None, type=click.Path(),
              help="Replay transcript file.")
@click.option("--report", "report_path", default=None, type=click.Path())
@with_context
def run(context, run_config, provider, transcript, report_path):
    """Execute a relationship run over a code set."""
    if not Path(run_config).exists():
        _fail(f"run config file not found: {run_config}")
    if provider:
        context.config.provider = provider
    if transcript:
        if not Path(transcript).exists():
            _fail(f"transcript file not found: {transcript}")
        context.config.transcript = transcript
    if provider or transcript:
        context.provider = context._build_provider()
    plan = load_run_plan(run_config)
    report = context.run(plan)  # also writes the default report + log
    if report_path is not None:
        written = Path(report_path)
        written.write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
    else:
        written = Path(context.config.reports_dir or
                       Path(context.config.store_path).parent / "reports")
        written = written / f"run_{report.run_id}.json"
    click.echo(
        f"run {report.run_id} {report.status}: {report.triples_written} triples, "
        f"cost {report.accumulated_cost}, report {written}"
    )
    if report.status == "failed":
        sys.exit(1)


@main.command("match")
@click.option("--string", "text", required=True)
@click.option("--code-set", "code_set", required=True)
@click.option("--n", default=4, show_default=True)
@click.option("--z", default=2.0, show_default=True)
@click.option("--subject-kinds", default="CLS", help="Comma-separated kinds.")
@click.option("--object-kinds", default="CLS")
@click.option("--include-expansions", is_flag=True)
@with_context
def match(context, text, code_set, n, z, subject_kinds, object_kinds,
          include_expansions):
    """Rank the closest codes for a free-text string."""
    result = context.match(
        text, code_set, n=n, z=z,
        subject_kinds=subject_kinds.split(","),
        object_kinds=object_kinds.split(","),
        include_expansions=include_expansions,
    )
    if not result.ranked:
        click.echo(f"no code within z={z}")
        return
    for rank, (code_id, distance) in enumerate(result.ranked, 1):
        click.echo(f"{rank}\t{code_id}\t{distance:.6f}")


@main.command("materialize")
@click.option("--name", required=True)
@click.option("--query", required=True)
@with_context
def materialize(context, name, query):
    """Materialize a custom table from a read-only SQL query."""
    table = context.materialize(name, query)
    click.echo(f"custom table {table.name!r} v{table.version}: {len(table.rows)} rows")


@main.command("serve")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path())
@with_context
def serve(context, host, port, frontend_dir):
    """Start the HTTP service (and UI, when built)."""
    import uvicorn

    from kgmill.service.app import create_app

    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    app = create_app(context, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host or context.config.host,
                port=port or context.config.port)


@main.command("export")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--kind", default="store", type=click.Choice(["store", "matches"]))
@with_context
def export(context, out_path, kind):
    """Write the canonical logical export (or the match review file)."""
    if kind == "matches":
        if out_path is None:
            _fail("--out is required for --kind matches")
        count = write_match_review(context.store, out_path)
        click.echo(f"wrote {count} match lines to {out_path}")
        return
    document = context.export()
    if out_path is None:
        click.echo(document)
    else:
        Path(out_path).write_text(document, encoding="utf-8")
        click.echo(f"wrote export to {out_path}")
