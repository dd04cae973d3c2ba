"""Operator CLI (``awctl``): ingestion, incremental updates, index rebuilds,
and collection export.

Exit codes: 0 ok, 1 partial failure, 2 input error, 3 not found.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import click

from . import memento
from .config import AppConfig, load_config
from .domain import DomainStore, utcnow
from .errors import UnknownCollection, UnknownGroup, WebarcError
from .ingestion import (
    CollectionLease,
    CollectionSourceRecord,
    FixtureCorpusWriter,
    FixtureSourceAdapter,
    SeedSourceRecord,
    ingest_collection,
    run_incremental_update,
    select_collections_for_update,
)
from .memento import MementoEntry, TimeMapDocument, serialize_timemap
from .search import SearchIndex

EXPORT_SCHEMA_VERSION = 1


@dataclass
class ExportManifest:
    group_id: str
    format: str
    resource_count: int
    capture_count: int
    generated_at: datetime
    schema_version: int = EXPORT_SCHEMA_VERSION

    def to_json(self) -> dict:
        return {
            "group_id": self.group_id, "format": self.format,
            "resource_count": self.resource_count,
            "capture_count": self.capture_count,
            "generated_at": self.generated_at.isoformat(),
            "schema_version": self.schema_version,
        }


def _open_store(config: AppConfig) -> DomainStore:
    return DomainStore(config.storage_path)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Key-value config file.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    """Administer a web-archive curation store."""
    ctx.obj = load_config(config_path)


@main.command()
@click.option("--source", "source_path", required=True,
              type=click.Path(), help="Fixture corpus directory.")
@click.option("--collection", "collection_ids", multiple=True,
              help="Restrict to specific collection ids.")
@click.pass_obj
def ingest(config: AppConfig, source_path: str, collection_ids: tuple[str, ...]):
    """Ingest collections from a fixture corpus into read-only groups."""
    try:
        adapter = FixtureSourceAdapter(source_path)
        collections = adapter.list_collections()
    except (UnknownCollection, OSError, json.JSONDecodeError, TypeError) as exc:
        click.echo(f"corpus error: {exc}", err=True)
        sys.exit(2)

    wanted = set(collection_ids) if collection_ids else None
    if wanted is not None:
        known = {c.external_id for c in collections}
        missing = wanted - known
        if missing:
            click.echo(f"unknown collection ids: {sorted(missing)}", err=True)
            sys.exit(2)

    store = _open_store(config)
    failures = 0
    try:
        for record in collections:
            if wanted is not None and record.external_id not in wanted:
                continue
            try:
                with CollectionLease(Path(config.storage_path) / "leases",
                                     record.external_id):
                    _, report = ingest_collection(
                        store, adapter, record.external_id,
                        fetch_parallelism=config.fetch_parallelism)
            except WebarcError as exc:
                click.echo(f"{record.external_id}: FAILED ({exc})", err=True)
                failures += 1
                continue
            click.echo(f"{record.external_id}: +{report.resources_added} resources,"
                       f" +{report.captures_added} captures,"
                       f" {len(report.seed_errors)} seed errors")
            for error in report.seed_errors:
                click.echo(f"  seed error: {error}", err=True)
    finally:
        store.close()
    sys.exit(1 if failures else 0)


@main.command()
@click.option("--source", "source_path", required=True, type=click.Path(),
              help="Fixture corpus directory.")
@click.option("--window-days", default=None, type=int,
              help="Inclusive capture-recency window (default from config).")
@click.pass_obj
def update(config: AppConfig, source_path: str, window_days: int | None):
    """Incrementally update previously ingested collections."""
    window = window_days if window_days is not None else config.update_window_days
    try:
        adapter = FixtureSourceAdapter(source_path)
    except UnknownCollection as exc:
        click.echo(f"corpus error: {exc}", err=True)
        sys.exit(2)
    store = _open_store(config)
    try:
        cursors = store.list_cursors()
        selected = select_collections_for_update(cursors, utcnow(), window)
        available = {c.external_id for c in adapter.list_collections()}
        selected = [s for s in selected if s in available]
        click.echo(f"{len(selected)} collections selected")
        failed = 0
        for external_id in selected:
            try:
                with CollectionLease(Path(config.storage_path) / "leases", external_id):
                    reports = run_incremental_update(
                        store, adapter, [external_id],
                        fetch_parallelism=config.fetch_parallelism)
            except WebarcError as exc:
                click.echo(f"{external_id}: FAILED ({exc})", err=True)
                failed += 1
                continue
            report = reports[external_id]
            click.echo(f"{external_id}: +{report.resources_added} resources,"
                       f" +{report.captures_added} captures,"
                       f" {report.resources_updated} updated")
    finally:
        store.close()
    sys.exit(1 if failed else 0)


@main.command()
@click.pass_obj
def reindex(config: AppConfig):
    """Rebuild the search index from the domain store (side-by-side swap)."""
    store = _open_store(config)
    try:
        index = SearchIndex()
        try:
            count = index.rebuild_from_store(store)
            index.save(config.index_path)
        except Exception as exc:  # old index stays intact on failure
            click.echo(f"rebuild failed: {exc}", err=True)
            sys.exit(1)
        click.echo(f"indexed {count} documents")
    finally:
        store.close()
    sys.exit(0)


@main.command()
@click.option("--group", "group_id", required=True)
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def export(config: AppConfig, group_id: str, fmt: str, out_path: str):
    """Export a group's resources with tags, comments, and capture lists."""
    store = _open_store(config)
    try:
        try:
            manifest = export_group(store, group_id, fmt, out_path)
        except UnknownGroup:
            click.echo(f"unknown group: {group_id}", err=True)
            sys.exit(3)
        click.echo(f"exported {manifest.resource_count} resources"
                   f" ({manifest.capture_count} captures) to {out_path}")
    finally:
        store.close()
    sys.exit(0)


def export_group(store: DomainStore, group_id: str, fmt: str,
                 out_path: str | Path, actor: str = "cli-operator") -> ExportManifest:
    group = store.get_group(group_id)  # raises UnknownGroup
    resources = store.list_resources(group_id)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    capture_total = 0

    if fmt == "jsonl":
        with open(out_path, "w", encoding="utf-8") as handle:
            for resource in resources:
                captures = store.list_captures(resource.id)
                capture_total += len(captures)
                record = {
                    "url": resource.url,
                    "original_url": resource.original_url,
                    "title": resource.title,
                    "description": resource.description,
                    "subjects": list(resource.subjects),
                    "collector": resource.collector,
                    "creator": resource.creator,
                    "publisher": resource.publisher,
                    "language": resource.language,
                    "format": resource.format,
                    "resource_type": resource.resource_type,
                    "media_type": resource.media_type,
                    "tags": [t.tag for t in store.list_tags(resource.id)],
                    "comments": [{"author": a.author, "text": a.text,
                                  "created_at": a.created_at.isoformat()}
                                 for a in store.list_annotations(resource.id)],
                    "captures": [{"datetime": c.capture_datetime.isoformat(),
                                  "uri": c.capture_uri,
                                  "provenance": c.provenance} for c in captures],
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["resource_id", "url", "title", "description",
                             "subjects", "collector", "creator", "publisher",
                             "language", "format", "resource_type", "media_type",
                             "tags", "capture_count", "first_capture",
                             "last_capture"])
            for resource in resources:
                captures = store.list_captures(resource.id)
                capture_total += len(captures)
                first, last, count = memento.capture_span(captures)
                writer.writerow([
                    resource.id, resource.url, resource.title,
                    resource.description, ";".join(resource.subjects),
                    resource.collector, resource.creator, resource.publisher,
                    resource.language, resource.format, resource.resource_type,
                    resource.media_type,
                    ";".join(t.tag for t in store.list_tags(resource.id)),
                    count,
                    first.isoformat() if first else "",
                    last.isoformat() if last else "",
                ])

    manifest = ExportManifest(group_id=group_id, format=fmt,
                              resource_count=len(resources),
                              capture_count=capture_total,
                              generated_at=store.clock())
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest.to_json(), indent=2) + "\n")
    store.log_action(actor, "export_performed", "group", group_id, group_id,
                     {"format": fmt, "resource_count": str(len(resources))})
    return manifest


def corpus_from_export(export_path: str | Path, corpus_dir: str | Path,
                       external_id: str, title: str) -> None:
    """Convert a jsonl export back into a fixture corpus so the round trip
    export -> re-ingest can be verified (and data can move between
    installations)."""
    writer = FixtureCorpusWriter(corpus_dir)
    seeds: list[SeedSourceRecord] = []
    with open(export_path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            seeds.append(SeedSourceRecord(
                url=record["url"], title=record["title"],
                description=record["description"], subjects=record["subjects"],
                collector=record["collector"], creator=record["creator"],
                publisher=record["publisher"], language=record["language"],
                format=record["format"], resource_type=record["resource_type"]))
            if record["captures"]:
                mementos = [
                    MementoEntry(uri=c["uri"],
                                 datetime=datetime.fromisoformat(c["datetime"]))
                    for c in record["captures"]
                ]
                mementos.sort(key=lambda m: (m.datetime, m.uri))
                doc = TimeMapDocument(original_uri=record["url"], mementos=mementos)
                writer.add_timemap(record["url"], serialize_timemap(doc))
    writer.add_collection(
        CollectionSourceRecord(external_id=external_id, title=title), seeds)


if __name__ == "__main__":
    main()
