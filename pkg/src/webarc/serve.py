"""Run the HTTP service: ``python -m webarc.serve --config app.conf``.

``--demo`` builds a throwaway instance: generates a small synthetic
corpus, ingests it, seeds a demo account (demo/demo), and stubs the
archive endpoints so everything works offline. ``--static`` serves a
built frontend bundle at the web root.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

import click

from .config import load_config
from .domain import DomainStore
from .memento import cdx_query_url
from .search import EndpointLiveProvider, FixtureLiveProvider, LiveResult, SearchIndex
from .service import AppContext, create_app
from .transport import HttpResponse, StubTransport, UrllibTransport

DEMO_CDX_BASE = "https://cdx.test/cdx"
DEMO_SAVE_BASE = "https://archive.test"

DEMO_INDEXED_URL = "http://www.tibetinfonet.net/"
DEMO_NEVER_INDEXED_URL = "http://never-indexed.example.org/"
DEMO_LOOKUP_FAILS_URL = "http://lookup-fails.example.org/"


def demo_transport() -> StubTransport:
    """Canned CDX/save responses: one indexed URL, one never indexed, one
    whose lookup fails, save requests accepted."""
    from .errors import TransportError

    indexed_first = json.dumps([
        ["timestamp", "original", "statuscode"],
        ["20080501000000", DEMO_INDEXED_URL, "200"],
    ]).encode()
    indexed_last = json.dumps([
        ["timestamp", "original", "statuscode"],
        ["20150731000000", DEMO_INDEXED_URL, "200"],
    ]).encode()
    empty = b"[]"
    stub = StubTransport()
    stub.add(cdx_query_url(DEMO_CDX_BASE, DEMO_INDEXED_URL, 1),
             HttpResponse(200, indexed_first))
    stub.add(cdx_query_url(DEMO_CDX_BASE, DEMO_INDEXED_URL, -1),
             HttpResponse(200, indexed_last))
    stub.add(cdx_query_url(DEMO_CDX_BASE, DEMO_NEVER_INDEXED_URL, 1),
             HttpResponse(200, empty))
    stub.add(cdx_query_url(DEMO_CDX_BASE, DEMO_NEVER_INDEXED_URL, -1),
             HttpResponse(200, empty))
    stub.add(cdx_query_url(DEMO_CDX_BASE, DEMO_LOOKUP_FAILS_URL, 1),
             TransportError("stubbed CDX outage"))
    for url in (DEMO_INDEXED_URL, DEMO_NEVER_INDEXED_URL):
        stub.add(f"{DEMO_SAVE_BASE}/save/{url}",
                 HttpResponse(200, b"", {"Content-Location": f"/web/20240101000000/{url}"}))
    return stub


def demo_live_provider() -> FixtureLiveProvider:
    return FixtureLiveProvider([
        LiveResult("http://news.example.com/rights", "Human rights news",
                   "Daily reporting on human rights."),
        LiveResult(DEMO_NEVER_INDEXED_URL, "Fresh rights blog",
                   "Human rights commentary, never archived."),
        LiveResult(DEMO_LOOKUP_FAILS_URL, "Rights portal",
                   "Human rights portal with flaky archive status."),
        LiveResult("http://art.example.com/", "Net art gallery",
                   "Contemporary net art pieces."),
    ])


def build_demo_context(data_dir: str | Path | None = None,
                       n_collections: int = 5) -> AppContext:
    from .config import AppConfig
    from .fixtures import JODI_EXTERNAL_ID, build_corpus
    from .ingestion import FixtureSourceAdapter, ingest_collection

    data_dir = Path(data_dir) if data_dir else Path(tempfile.mkdtemp(prefix="webarc-demo-"))
    corpus_dir = data_dir / "corpus"
    if not (corpus_dir / "collections.jsonl").exists():
        build_corpus(corpus_dir, n_collections=n_collections, hrwa_seeds=25)

    store = DomainStore(data_dir / "store")
    index = SearchIndex()
    index.attach(store)
    adapter = FixtureSourceAdapter(corpus_dir)
    for record in adapter.list_collections():
        ingest_collection(store, adapter, record.external_id)
    index.rebuild_from_store(store)

    if store.find_user("demo") is None:
        demo = store.create_user("demo", "Demo Curator", role="curator",
                                 password="demo")
        group = store.create_group("My Nominations", "demo workspace", demo.id)
        from .domain import ResourceData
        store.add_resource(group.id, ResourceData(
            original_url="http://news.example.com/rights",
            title="Human rights news", source="live_web"), actor=demo.id)

    config = AppConfig(storage_path=str(data_dir / "store"),
                       index_path=str(data_dir / "index"),
                       cdx_base_url=DEMO_CDX_BASE, save_base_url=DEMO_SAVE_BASE,
                       live_provider="fixture")
    return AppContext(store=store, index=index, transport=demo_transport(),
                      provider=demo_live_provider(), config=config)


def build_context(config_path: str | None) -> AppContext:
    config = load_config(config_path)
    store = DomainStore(config.storage_path)
    index_dir = Path(config.index_path)
    if (index_dir / "documents.json").exists():
        index = SearchIndex.load(index_dir)
    else:
        index = SearchIndex()
        index.rebuild_from_store(store)
    index.attach(store)
    transport = UrllibTransport(politeness_delay_ms=config.politeness_delay_ms)
    provider = None
    if config.live_provider == "fixture":
        provider = demo_live_provider()
    elif config.live_provider == "endpoint":
        provider = EndpointLiveProvider(config.provider_endpoint, transport)
    return AppContext(store=store, index=index, transport=transport,
                      provider=provider, config=config)


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8600, type=int)
@click.option("--demo", is_flag=True, help="Serve a self-contained demo instance.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Demo data directory (default: fresh temp dir).")
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None,
              help="Directory of built frontend assets to serve at /.")
def main(config_path, host, port, demo, data_dir, static_dir):
    import uvicorn

    ctx = build_demo_context(data_dir) if demo else build_context(config_path)
    app = create_app(ctx)
    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
