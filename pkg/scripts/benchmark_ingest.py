#!/usr/bin/env python3
"""Time a full-corpus ingest plus an idempotent re-ingest.

Builds the synthetic corpus in a temporary directory unless --corpus points
at an existing one, ingests every collection into an in-memory store, then
re-ingests and verifies exact state equality.
"""

from __future__ import annotations

import argparse
import tempfile
import time
from pathlib import Path

from webarc.domain import DomainStore
from webarc.fixtures import build_corpus
from webarc.ingestion import FixtureSourceAdapter, ingest_collection


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", type=Path, default=None)
    parser.add_argument("--collections", type=int, default=200)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        corpus = args.corpus
        if corpus is None:
            corpus = Path(tmp) / "corpus"
            started = time.perf_counter()
            build_corpus(corpus, n_collections=args.collections)
            print(f"corpus build: {time.perf_counter() - started:.1f}s")

        adapter = FixtureSourceAdapter(corpus)
        external_ids = [c.external_id for c in adapter.list_collections()]
        store = DomainStore()

        started = time.perf_counter()
        resources = captures = 0
        for external_id in external_ids:
            _, report = ingest_collection(store, adapter, external_id)
            resources += report.resources_added
            captures += report.captures_added
        elapsed = time.perf_counter() - started
        print(f"ingest: {len(external_ids)} collections, {resources} resources,"
              f" {captures} captures in {elapsed:.1f}s")

        before = store.state_snapshot()
        started = time.perf_counter()
        for external_id in external_ids:
            ingest_collection(store, adapter, external_id)
        elapsed = time.perf_counter() - started
        identical = store.state_snapshot() == before
        print(f"re-ingest: {elapsed:.1f}s, state identical: {identical}")
        store.close()


if __name__ == "__main__":
    main()
