"""Command-line driver. Every subcommand goes through the same engine
methods as the HTTP API, so responses are reproducible either way."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .config import ConfigError, EngineConfig, load_config
from .curation import CurationError
from .engine import Engine
from .network import AmbiguousName
from .query import UnknownKind
from .sources import SourceError

CONFIG_ENV = "BNS_CONFIG"


def _load_engine(config_path: str | None) -> Engine:
    path = config_path or os.environ.get(CONFIG_ENV)
    if path:
        config = load_config(path)
    else:
        config = EngineConfig(source_dir=Path("sources"))
    engine = Engine(config, persist=True)
    engine.load_state()
    return engine


def _emit(doc, as_json: bool, human=None) -> None:
    if as_json or human is None:
        click.echo(json.dumps(doc, indent=2, sort_keys=False))
    else:
        human(doc)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help=f"Engine config file (or ${CONFIG_ENV}).")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Business-network inference engine."""
    ctx.obj = config_path


def _engine(ctx: click.Context) -> Engine:
    try:
        return _load_engine(ctx.obj)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.argument("origin")
@click.argument("snapshot", type=click.Path(exists=True))
@click.option("--full/--delta", "full", default=True, help="Snapshot mode.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def load(ctx, origin: str, snapshot: str, full: bool, as_json: bool) -> None:
    """Ingest one snapshot file for ORIGIN."""
    engine = _engine(ctx)
    try:
        report = engine.load_file(origin, snapshot, "full" if full else "delta")
    except SourceError as exc:
        raise click.ClickException(str(exc))

    def human(doc):
        click.echo(
            f"{doc['origin']}: created={doc['created']} updated={doc['updated']} "
            f"unchanged={doc['unchanged']} tombstoned={doc['tombstoned']} "
            f"rejected={len(doc['rejected'])}"
        )
        for line in doc["rejected"]:
            click.echo(f"  line {line['line']}: {line['reason']}", err=True)

    _emit(report, as_json, human)


@main.command()
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default=None)
@click.pass_context
def serve(ctx, port: int | None, host: str | None) -> None:
    """Run the HTTP/JSON API."""
    import uvicorn

    from .api import create_app

    engine = _engine(ctx)
    app = create_app(engine)
    uvicorn.run(
        app,
        host=host or engine.config.host,
        port=port or engine.config.port,
        log_level="info",
    )


@main.command()
@click.argument("term", required=False)
@click.option("--type", "type_", default=None, help="Restrict the result kind.")
@click.option("--filter", "filters", multiple=True, metavar="FIELD=VALUE",
              help="Field-specific criterion; repeatable.")
@click.option("--offset", type=int, default=0)
@click.option("--limit", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def search(ctx, term, type_, filters, offset, limit, as_json) -> None:
    """Keyword search with type restriction and field criteria."""
    engine = _engine(ctx)
    field_filters = {}
    for item in filters:
        name, sep, value = item.partition("=")
        if not sep:
            raise click.ClickException(f"--filter needs FIELD=VALUE, got {item!r}")
        field_filters[name] = value
    try:
        doc = engine.search_doc(term, type_, field_filters, offset, limit)
    except UnknownKind as exc:
        raise click.ClickException(f"unknown kind {exc.args[0]!r}")

    def human(doc):
        for row in doc["results"]:
            click.echo(f"{row['bn_id']}\t{row['kind']}\t{row['name']}\t{row['score']}")

    _emit(doc, as_json, human)


@main.command()
@click.argument("name")
@click.option("--paths", default="", help="Comma-separated projection paths.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def show(ctx, name: str, paths: str, as_json: bool) -> None:
    """Project an entity (meta, attributes, one-hop edge fields)."""
    engine = _engine(ctx)
    show_paths = [p for p in paths.split(",") if p.strip()]
    doc = _resolve_errors(lambda: engine.project_doc(name, show_paths))
    _emit(doc, as_json)


@main.command()
@click.argument("name")
@click.argument("kind", required=False)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def neighbors(ctx, name: str, kind: str | None, as_json: bool) -> None:
    """Flow neighbors of an entity; with KIND=host, the neighbors' hosts."""
    engine = _engine(ctx)
    doc = _resolve_errors(lambda: engine.neighbors_doc(name, kind))

    def human(doc):
        for row in doc:
            click.echo(f"{row['bn_id']}\t{row['kind']}\t{row['name']}")

    _emit(doc, as_json, human)


@main.command()
@click.argument("bn_id")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def lineage(ctx, bn_id: str, as_json: bool) -> None:
    """Trace an entity to its source records, field by field."""
    engine = _engine(ctx)
    doc = _resolve_errors(lambda: engine.lineage_doc(bn_id))

    def human(doc):
        click.echo(f"{doc['bn_id']}: {doc['transformation']}")
        for source in doc["sources"]:
            click.echo(f"  source {source}")
        for field, contributor in doc["field_contributions"].items():
            click.echo(f"  {field} <- {contributor}")

    _emit(doc, as_json, human)


@main.command()
@click.argument("enhancement_id")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def deploy(ctx, enhancement_id: str, as_json: bool) -> None:
    """Push a pending enhancement back to its source."""
    engine = _engine(ctx)
    doc = _resolve_errors(lambda: engine.deploy(enhancement_id))

    def human(doc):
        click.echo(f"{doc['enhancement_id']}: {doc['status']}")

    _emit(doc, as_json, human)


@main.command()
@click.pass_context
def export(ctx) -> None:
    """Dump the queryable network as a JSON document."""
    engine = _engine(ctx)
    click.echo(json.dumps(engine.export_doc(), indent=2))


def _resolve_errors(fn):
    try:
        return fn()
    except AmbiguousName as exc:
        raise click.ClickException(
            f"{exc}: candidates {', '.join(exc.candidates)}"
        )
    except UnknownKind as exc:
        raise click.ClickException(f"unknown kind {exc.args[0]!r}")
    except CurationError as exc:
        raise click.ClickException(str(exc))
    except KeyError as exc:
        raise click.ClickException(f"not found: {exc.args[0]}")


if __name__ == "__main__":
    main(sys.argv[1:])
