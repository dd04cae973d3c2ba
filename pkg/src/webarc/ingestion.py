"""Loading external archive-service collections into read-only groups.

A source adapter yields collection metadata, seed lists, TimeMaps, and
optional HTML pages. The primary adapter reads an on-disk fixture corpus
(JSON Lines plus raw link-format bodies); a live scraper can implement the
same contract. Ingestion is idempotent and incremental updates only touch
collections with recent captures (90-day inclusive window).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Protocol
from urllib.parse import quote, unquote

from .domain import CaptureRecord, CrawlCursor, DomainStore, Group, ResourceData
from .errors import UnknownCollection
from .memento import TimeMapDocument, parse_timemap
from .urlnorm import normalize_url

GONE_THUMBNAIL_MESSAGE = "The page is no longer available on the web"
GONE_PLACEHOLDER = "placeholder:gone"
UNKNOWN_PLACEHOLDER = "placeholder:unknown"

DEFAULT_UPDATE_WINDOW_DAYS = 90


@dataclass
class CollectionSourceRecord:
    external_id: str
    title: str
    institution: str = ""
    description: str = ""
    subjects: list[str] = field(default_factory=list)
    collectors: list[str] = field(default_factory=list)
    portal_link: str = ""


@dataclass
class SeedSourceRecord:
    url: str
    title: str = ""
    description: str = ""
    subjects: list[str] = field(default_factory=list)
    collector: str = ""
    creator: str = ""
    publisher: str = ""
    language: str = ""
    format: str = ""
    resource_type: str = ""


@dataclass
class IngestReport:
    external_id: str
    resources_added: int = 0
    captures_added: int = 0
    resources_updated: int = 0
    seed_errors: list[str] = field(default_factory=list)


class SourceAdapter(Protocol):
    def list_collections(self) -> list[CollectionSourceRecord]: ...
    def list_seeds(self, external_id: str) -> list[SeedSourceRecord]: ...
    def fetch_timemap(self, url: str) -> TimeMapDocument: ...
    def fetch_page(self, url: str) -> bytes | None: ...


def urlsafe(url: str) -> str:
    """Filesystem-safe encoding of a URL, reversible via unquote."""
    return quote(url, safe="")


def urlsafe_decode(name: str) -> str:
    return unquote(name)


# -- fixture corpus -----------------------------------------------------------

class FixtureSourceAdapter:
    """Reads the documented on-disk corpus:

    collections.jsonl           one CollectionSourceRecord per line
    seeds/{external_id}.jsonl   one SeedSourceRecord per line
    timemaps/{urlsafe(url)}.link  raw link-format bodies
    pages/{urlsafe(url)}.html     optional HTML for the metadata fallback
    """

    def __init__(self, corpus_dir: str | Path):
        self.corpus_dir = Path(corpus_dir)
        if not (self.corpus_dir / "collections.jsonl").is_file():
            raise UnknownCollection(f"no collections.jsonl under {corpus_dir}")

    def list_collections(self) -> list[CollectionSourceRecord]:
        records = []
        with open(self.corpus_dir / "collections.jsonl", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    records.append(CollectionSourceRecord(**json.loads(line)))
        return records

    def list_seeds(self, external_id: str) -> list[SeedSourceRecord]:
        path = self.corpus_dir / "seeds" / f"{external_id}.jsonl"
        if not path.is_file():
            raise UnknownCollection(external_id)
        seeds = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    seeds.append(SeedSourceRecord(**json.loads(line)))
        return seeds

    def fetch_timemap(self, url: str) -> TimeMapDocument:
        path = self.corpus_dir / "timemaps" / f"{urlsafe(url)}.link"
        if not path.is_file():
            return TimeMapDocument(original_uri=url)
        return parse_timemap(path.read_bytes(), "application/link-format")

    def fetch_page(self, url: str) -> bytes | None:
        path = self.corpus_dir / "pages" / f"{urlsafe(url)}.html"
        return path.read_bytes() if path.is_file() else None


class FixtureCorpusWriter:
    """Builds fixture corpora for tests, demos, and export round-trips."""

    def __init__(self, corpus_dir: str | Path):
        self.corpus_dir = Path(corpus_dir)
        self.corpus_dir.mkdir(parents=True, exist_ok=True)
        (self.corpus_dir / "seeds").mkdir(exist_ok=True)
        (self.corpus_dir / "timemaps").mkdir(exist_ok=True)
        (self.corpus_dir / "pages").mkdir(exist_ok=True)
        path = self.corpus_dir / "collections.jsonl"
        if not path.exists():
            path.touch()

    def add_collection(self, record: CollectionSourceRecord,
                       seeds: Iterable[SeedSourceRecord]) -> None:
        with open(self.corpus_dir / "collections.jsonl", "a", encoding="utf-8") as handle:
            handle.write(json.dumps(asdict(record), ensure_ascii=False) + "\n")
        with open(self.corpus_dir / "seeds" / f"{record.external_id}.jsonl", "w",
                  encoding="utf-8") as handle:
            for seed in seeds:
                handle.write(json.dumps(asdict(seed), ensure_ascii=False) + "\n")

    def write_seeds(self, external_id: str, seeds: Iterable[SeedSourceRecord]) -> None:
        with open(self.corpus_dir / "seeds" / f"{external_id}.jsonl", "w",
                  encoding="utf-8") as handle:
            for seed in seeds:
                handle.write(json.dumps(asdict(seed), ensure_ascii=False) + "\n")

    def add_timemap(self, url: str, body: bytes) -> None:
        (self.corpus_dir / "timemaps" / f"{urlsafe(url)}.link").write_bytes(body)

    def add_page(self, url: str, html: bytes) -> None:
        (self.corpus_dir / "pages" / f"{urlsafe(url)}.html").write_bytes(html)


# -- HTML metadata fallback ---------------------------------------------------

class _MetaExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.title: str | None = None
        self.lang: str | None = None
        self.keywords: str | None = None
        self._in_title = False
        self._title_parts: list[str] = []

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag == "html" and self.lang is None and attrs.get("lang"):
            self.lang = attrs["lang"]
        elif tag == "title" and self.title is None:
            self._in_title = True
        elif tag == "meta" and (attrs.get("name") or "").lower() == "keywords":
            if self.keywords is None and attrs.get("content"):
                self.keywords = attrs["content"]

    def handle_endtag(self, tag):
        if tag == "title" and self._in_title:
            self._in_title = False
            self.title = "".join(self._title_parts).strip()

    def handle_data(self, data):
        if self._in_title:
            self._title_parts.append(data)


def apply_html_meta_fallback(seed: SeedSourceRecord, html: bytes | None) -> SeedSourceRecord:
    """Fill empty title/language/subjects from the seed's HTML page.

    Non-empty fields are never overwritten; malformed or absent HTML fills
    nothing.
    """
    if html is None or (seed.title and seed.language and seed.subjects):
        return seed
    parser = _MetaExtractor()
    try:
        parser.feed(html.decode("utf-8", errors="replace"))
        parser.close()
    except Exception:
        return seed
    filled = SeedSourceRecord(**asdict(seed))
    if not filled.title and parser.title:
        filled.title = parser.title
    if not filled.language and parser.lang:
        filled.language = parser.lang
    if not filled.subjects and parser.keywords:
        filled.subjects = [part.strip() for part in parser.keywords.split(",")
                           if part.strip()]
    return filled


# -- ingest and update --------------------------------------------------------

SYSTEM_USERNAME = "system"


def _system_user(store: DomainStore) -> str:
    user = store.find_user(SYSTEM_USERNAME)
    if user is None:
        user = store.create_user(SYSTEM_USERNAME, "Ingestion", role="admin")
    return user.id


def _sync_seeds(store: DomainStore, adapter: SourceAdapter, group: Group,
                external_id: str, report: IngestReport,
                fetch_parallelism: int = 4) -> datetime | None:
    """Bring a read-only group in line with the adapter's seed list.

    Returns the latest capture datetime seen, for the crawl cursor.
    """
    from concurrent.futures import ThreadPoolExecutor

    system = _system_user(store)
    seeds = adapter.list_seeds(external_id)
    existing = {r.url: r for r in store.list_resources(group.id)}
    latest_capture: datetime | None = None

    def fetch(seed: SeedSourceRecord):
        timemap = adapter.fetch_timemap(seed.url)
        page = None
        if not (seed.title and seed.language and seed.subjects):
            page = adapter.fetch_page(seed.url)
        return seed, timemap, page

    with ThreadPoolExecutor(max_workers=max(1, fetch_parallelism)) as pool:
        fetched = list(pool.map(fetch, seeds))

    for seed, timemap, page in fetched:
        try:
            seed = apply_html_meta_fallback(seed, page)
            url = normalize_url(seed.url)
            captures = [
                CaptureRecord("", m.datetime, m.uri, "ingested_archive")
                for m in timemap.mementos
            ]
            for capture in captures:
                if latest_capture is None or capture.capture_datetime > latest_capture:
                    latest_capture = capture.capture_datetime
            current = existing.get(url)
            if current is None:
                resource = store.add_resource(
                    group.id,
                    ResourceData(
                        original_url=seed.url, title=seed.title,
                        description=seed.description, subjects=list(seed.subjects),
                        collector=seed.collector, creator=seed.creator,
                        publisher=seed.publisher, language=seed.language,
                        format=seed.format, resource_type=seed.resource_type,
                        source="archive_collection"),
                    actor=system, privileged=True)
                report.resources_added += 1
                report.captures_added += store.add_captures(
                    resource.id, captures, privileged=True)
            else:
                changes = {}
                for name in ("title", "description", "creator", "publisher",
                             "language", "format", "resource_type", "collector"):
                    if getattr(seed, name) and getattr(seed, name) != getattr(current, name):
                        changes[name] = getattr(seed, name)
                if seed.subjects and tuple(seed.subjects) != current.subjects:
                    changes["subjects"] = list(seed.subjects)
                if changes:
                    store.edit_resource_metadata(current.id, changes, system,
                                                 privileged=True)
                    report.resources_updated += 1
                added = store.add_captures(current.id, captures, privileged=True)
                report.captures_added += added
        except Exception as exc:  # per-seed failures are reported, not fatal
            report.seed_errors.append(f"{seed.url}: {exc}")
    return latest_capture


def ingest_collection(store: DomainStore, adapter: SourceAdapter,
                      external_id: str, fetch_parallelism: int = 4) -> tuple[Group, IngestReport]:
    """Mirror one external collection into a read-only group. Idempotent:
    re-running adds nothing new for an unchanged corpus."""
    records = {c.external_id: c for c in adapter.list_collections()}
    record = records.get(external_id)
    if record is None:
        raise UnknownCollection(external_id)

    system = _system_user(store)
    group = store.create_ingested_group(
        title=record.title, description=record.description, creator=system,
        external_id=external_id, portal_link=record.portal_link or None,
        institution=record.institution or None, subjects=record.subjects,
        collectors=record.collectors)

    report = IngestReport(external_id=external_id)
    latest = _sync_seeds(store, adapter, group, external_id, report,
                         fetch_parallelism)
    prior = store.get_cursor(external_id)
    if latest is None and prior is not None:
        latest = prior.latest_capture_at
    store.write_cursor(CrawlCursor(external_id, store.clock(), latest))
    return group, report


def select_collections_for_update(cursors: list[CrawlCursor], now: datetime,
                                  window_days: int = DEFAULT_UPDATE_WINDOW_DAYS) -> list[str]:
    """Collections with a capture inside the inclusive window, plus
    never-captured collections (those must always be retried)."""
    assert window_days > 0
    threshold = now - timedelta(days=window_days)
    return [c.external_id for c in cursors
            if c.latest_capture_at is None or c.latest_capture_at >= threshold]


def run_incremental_update(store: DomainStore, adapter: SourceAdapter,
                           external_ids: list[str],
                           fetch_parallelism: int = 4) -> dict[str, IngestReport]:
    """Re-sync previously ingested collections; new seeds and mementos are
    added, changed source metadata overwrites the read-only mirrors."""
    reports: dict[str, IngestReport] = {}
    for external_id in external_ids:
        group = store.find_group_by_external_id(external_id)
        if group is None:
            raise UnknownCollection(f"never ingested: {external_id}")
        report = IngestReport(external_id=external_id)
        latest = _sync_seeds(store, adapter, group, external_id, report,
                             fetch_parallelism)
        prior = store.get_cursor(external_id)
        if latest is None and prior is not None:
            latest = prior.latest_capture_at
        store.write_cursor(CrawlCursor(external_id, store.clock(), latest))
        reports[external_id] = report
    return reports


# -- thumbnails ---------------------------------------------------------------

class ScreenshotProvider(Protocol):
    def screenshot(self, url: str) -> bytes: ...


def resolve_thumbnail(store: DomainStore, resource, provider: ScreenshotProvider | None,
                      thumbnail_dir: str | Path | None = None) -> str:
    """Best-effort thumbnail for a resource's live URL.

    Gone pages get the standard placeholder; provider failures degrade to a
    placeholder with availability=unknown. Thumbnails are frozen at add
    time and not refreshed on updates.
    """
    if resource.availability == "gone" or provider is None:
        ref = GONE_PLACEHOLDER if resource.availability == "gone" else UNKNOWN_PLACEHOLDER
        store.set_thumbnail(resource.id, ref,
                            resource.availability if resource.availability == "gone" else "unknown")
        return ref
    try:
        image = provider.screenshot(resource.url)
    except Exception:
        store.set_thumbnail(resource.id, UNKNOWN_PLACEHOLDER, "unknown")
        return UNKNOWN_PLACEHOLDER
    if thumbnail_dir is not None:
        thumbnail_dir = Path(thumbnail_dir)
        thumbnail_dir.mkdir(parents=True, exist_ok=True)
        ref = f"thumb/{resource.id}.png"
        (thumbnail_dir / f"{resource.id}.png").write_bytes(image)
    else:
        ref = f"thumb/{resource.id}"
    store.set_thumbnail(resource.id, ref, "live")
    return ref


# -- per-collection update lease ----------------------------------------------

class CollectionLease:
    """File-based mutual exclusion so two processes never update the same
    collection at once. Stale leases (dead pid or older than timeout) are
    broken."""

    def __init__(self, lease_dir: str | Path, external_id: str,
                 stale_after_s: float = 3600.0):
        self.path = Path(lease_dir) / f"{urlsafe(external_id)}.lease"
        self.stale_after_s = stale_after_s

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                os.write(fd, str(os.getpid()).encode())
                os.close(fd)
                return self
            except FileExistsError:
                age = time.time() - self.path.stat().st_mtime
                if age > self.stale_after_s:
                    self.path.unlink(missing_ok=True)
                    continue
                raise RuntimeError(f"collection update already running: {self.path}")

    def __exit__(self, *exc_info):
        self.path.unlink(missing_ok=True)
        return False
