"""Metadata search: inverted index with field-boosted BM25 ranking, faceted
filtering, and federated merge of archive hits with a pluggable live-web
provider (archive results always come first).

The index is a cache over the domain store; it can be rebuilt from the
store at any time and persists to a directory with a version marker.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Protocol

from .domain import DomainStore, Resource, parse_iso
from .errors import InvalidFacetField, ProviderUnavailable
from .urlnorm import InvalidUrl, normalize_url

INDEX_FORMAT_VERSION = 1

BM25_K1 = 1.2
BM25_B = 0.75

# boost per searchable field; doc length is weighted the same way so the
# normalization stays consistent with the term frequencies
FIELD_WEIGHTS = {
    "title": 3.0,
    "tags": 2.0,
    "subjects": 2.0,
    "description": 1.0,
    "comments_text": 1.0,
}

FACET_FIELDS = ("group", "collector", "creator", "language", "media_type",
                "tag", "source_service")

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Unicode word tokens, lower-cased; no stemming, no stop-words."""
    return [t.lower() for t in _TOKEN_RE.findall(text)]


@dataclass
class IndexDocument:
    resource_id: str
    title: str = ""
    description: str = ""
    subjects: str = ""
    comments_text: str = ""
    tags: str = ""  # space-joined normalized tags for matching
    facets: dict[str, list[str]] = field(default_factory=dict)
    latest_capture_at: datetime | None = None
    capture_first: datetime | None = None
    capture_count: int = 0
    url: str = ""
    group_id: str = ""
    group_title: str = ""

    def field_text(self, name: str) -> str:
        return getattr(self, name)


@dataclass
class QuerySpec:
    terms: str = ""
    media_type: str | None = None
    filters: dict[str, str] = field(default_factory=dict)
    page: int = 1
    page_size: int = 20


@dataclass
class ResultEntry:
    kind: str  # "archive" | "live"
    url: str
    title: str
    snippet: str
    score: float = 0.0
    source_label: str = ""
    resource_id: str | None = None
    group_id: str | None = None
    matched_terms: list[str] = field(default_factory=list)
    snippet_offsets: list[tuple[int, int]] = field(default_factory=list)
    capture_first: datetime | None = None
    capture_last: datetime | None = None
    capture_count: int = 0
    score_components: dict[str, float] = field(default_factory=dict)


@dataclass
class SearchPage:
    results: list[ResultEntry]
    facet_counts: dict[str, dict[str, int]]
    total: int
    page: int = 1
    page_size: int = 20
    provider_warning: bool = False


@dataclass
class LiveResult:
    url: str
    title: str
    snippet: str = ""


class LiveWebProvider(Protocol):
    def search(self, terms: str, media_type: str | None, count: int) -> list[LiveResult]:
        ...


class SearchIndex:
    """In-memory inverted index over resource metadata documents."""

    def __init__(self) -> None:
        self.docs: dict[str, IndexDocument] = {}

    # -- building -------------------------------------------------------------

    def index_resource(self, resource: Resource, tags: list[str],
                       comments: list[str],
                       captures_summary: tuple[datetime | None, datetime | None, int],
                       group_title: str = "", source_service: str = "") -> None:
        first, last, count = captures_summary
        doc = IndexDocument(
            resource_id=resource.id,
            title=resource.title,
            description=resource.description,
            subjects=" ".join(resource.subjects),
            comments_text=" ".join(comments),
            tags=" ".join(tags),
            facets={
                "group": [resource.group_id],
                "collector": [resource.collector] if resource.collector else [],
                "creator": [resource.creator] if resource.creator else [],
                "language": [resource.language] if resource.language else [],
                "media_type": [resource.media_type],
                "tag": list(tags),
                "source_service": [source_service] if source_service else [resource.source],
            },
            latest_capture_at=last,
            capture_first=first,
            capture_count=count,
            url=resource.url,
            group_id=resource.group_id,
            group_title=group_title,
        )
        self.docs[resource.id] = doc

    def deindex_resource(self, resource_id: str) -> None:
        self.docs.pop(resource_id, None)

    def upsert_from_store(self, store: DomainStore, resource_id: str) -> None:
        from .memento import capture_span

        resource = store.get_resource(resource_id)
        tags = [t.tag for t in store.list_tags(resource_id)]
        comments = [a.text for a in store.list_annotations(resource_id)]
        captures = store.list_captures(resource_id)
        group = store.get_group(resource.group_id)
        service = "archive" if group.origin == "ingested" else resource.source
        self.index_resource(resource, tags, comments, capture_span(captures),
                            group_title=group.title, source_service=service)

    def attach(self, store: DomainStore) -> None:
        """Subscribe to the store's index events so writes keep us current."""

        def listener(kind: str, resource_id: str) -> None:
            if kind == "delete":
                self.deindex_resource(resource_id)
            else:
                self.upsert_from_store(store, resource_id)

        store.index_listeners.append(listener)

    def rebuild_from_store(self, store: DomainStore) -> int:
        """Full rebuild; the store, not the index, is authoritative."""
        self.docs.clear()
        for group in store.list_groups():
            for resource in store.list_resources(group.id):
                self.upsert_from_store(store, resource.id)
        return len(self.docs)

    # -- persistence ----------------------------------------------------------

    def save(self, index_dir: str | Path) -> None:
        index_dir = Path(index_dir)
        index_dir.mkdir(parents=True, exist_ok=True)
        (index_dir / "INDEX_VERSION").write_text(f"{INDEX_FORMAT_VERSION}\n")
        payload = []
        for doc in self.docs.values():
            record = {
                "resource_id": doc.resource_id, "title": doc.title,
                "description": doc.description, "subjects": doc.subjects,
                "comments_text": doc.comments_text, "tags": doc.tags,
                "facets": doc.facets, "url": doc.url, "group_id": doc.group_id,
                "group_title": doc.group_title,
                "capture_count": doc.capture_count,
                "capture_first": doc.capture_first.isoformat() if doc.capture_first else None,
                "latest_capture_at": doc.latest_capture_at.isoformat() if doc.latest_capture_at else None,
            }
            payload.append(record)
        tmp = index_dir / "documents.json.tmp"
        tmp.write_text(json.dumps(payload, ensure_ascii=False))
        tmp.replace(index_dir / "documents.json")

    @classmethod
    def load(cls, index_dir: str | Path) -> "SearchIndex":
        index_dir = Path(index_dir)
        version = int((index_dir / "INDEX_VERSION").read_text().strip())
        if version != INDEX_FORMAT_VERSION:
            raise RuntimeError(f"unsupported index version {version}")
        index = cls()
        for record in json.loads((index_dir / "documents.json").read_text()):
            doc = IndexDocument(
                resource_id=record["resource_id"], title=record["title"],
                description=record["description"], subjects=record["subjects"],
                comments_text=record["comments_text"], tags=record["tags"],
                facets=record["facets"], url=record["url"],
                group_id=record["group_id"], group_title=record["group_title"],
                capture_count=record["capture_count"],
                capture_first=parse_iso(record["capture_first"]),
                latest_capture_at=parse_iso(record["latest_capture_at"]))
            index.docs[doc.resource_id] = doc
        return index

    # -- querying -------------------------------------------------------------

    def _weighted_tf(self, doc: IndexDocument, term: str) -> float:
        tf = 0.0
        for name, weight in FIELD_WEIGHTS.items():
            tf += weight * tokenize(doc.field_text(name)).count(term)
        return tf

    def _weighted_len(self, doc: IndexDocument) -> float:
        return sum(weight * len(tokenize(doc.field_text(name)))
                   for name, weight in FIELD_WEIGHTS.items())

    def _doc_terms(self, doc: IndexDocument) -> set[str]:
        terms: set[str] = set()
        for name in FIELD_WEIGHTS:
            terms.update(tokenize(doc.field_text(name)))
        return terms

    def _matches_filters(self, doc: IndexDocument, filters: dict[str, str],
                         media_type: str | None) -> bool:
        if media_type and media_type not in doc.facets.get("media_type", []):
            return False
        for facet_field, value in filters.items():
            if value not in doc.facets.get(facet_field, []):
                return False
        return True

    def _candidates(self, terms: list[str], filters: dict[str, str],
                    media_type: str | None) -> list[IndexDocument]:
        unknown = set(filters) - set(FACET_FIELDS)
        if unknown:
            raise InvalidFacetField(f"unknown facet fields: {sorted(unknown)}")
        out = []
        for doc in self.docs.values():
            if not self._matches_filters(doc, filters, media_type):
                continue
            if terms and not (set(terms) & self._doc_terms(doc)):
                continue
            out.append(doc)
        return out

    def _score(self, doc: IndexDocument, terms: list[str], avgdl: float,
               df: dict[str, int], n_docs: int) -> tuple[float, dict[str, float]]:
        dl = self._weighted_len(doc)
        components: dict[str, float] = {}
        total = 0.0
        for term in dict.fromkeys(terms):  # unique, stable order
            tf = self._weighted_tf(doc, term)
            if tf == 0:
                continue
            idf = math.log(1.0 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
            denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl) if avgdl > 0 else tf
            contribution = idf * tf * (BM25_K1 + 1.0) / denom
            components[term] = contribution
            total += contribution
        return total, components

    def ranked(self, q: QuerySpec) -> list[ResultEntry]:
        """Full ranked archive result list (unpaginated)."""
        terms = tokenize(q.terms)
        candidates = self._candidates(terms, q.filters, q.media_type)
        n_docs = len(self.docs)
        avgdl = (sum(self._weighted_len(d) for d in self.docs.values()) / n_docs
                 if n_docs else 0.0)
        df = {term: sum(1 for d in self.docs.values() if term in self._doc_terms(d))
              for term in terms}

        scored = []
        for doc in candidates:
            score, components = self._score(doc, terms, avgdl, df, n_docs)
            scored.append((score, doc, components))
        scored.sort(key=lambda item: (
            -item[0],
            -(item[1].latest_capture_at.timestamp() if item[1].latest_capture_at else float("-inf")),
            item[1].resource_id))

        results = []
        for score, doc, components in scored:
            snippet, offsets, matched = _make_snippet(doc, terms)
            results.append(ResultEntry(
                kind="archive", url=doc.url, title=doc.title, snippet=snippet,
                score=score, source_label=doc.group_title or "Archive collection",
                resource_id=doc.resource_id, group_id=doc.group_id,
                matched_terms=matched, snippet_offsets=offsets,
                capture_first=doc.capture_first, capture_last=doc.latest_capture_at,
                capture_count=doc.capture_count, score_components=components))
        return results

    def facet_counts(self, q: QuerySpec) -> dict[str, dict[str, int]]:
        """Per-facet value counts with the facet's own filter removed, so the
        UI can offer sibling choices (multi-select convention)."""
        terms = tokenize(q.terms)
        counts: dict[str, dict[str, int]] = {}
        for facet_field in FACET_FIELDS:
            others = {k: v for k, v in q.filters.items() if k != facet_field}
            field_counts: dict[str, int] = {}
            for doc in self._candidates(terms, others, q.media_type):
                for value in set(doc.facets.get(facet_field, [])):
                    field_counts[value] = field_counts.get(value, 0) + 1
            if field_counts:
                counts[facet_field] = field_counts
        return counts

    def execute_search(self, q: QuerySpec) -> SearchPage:
        full = self.ranked(q)
        start = (q.page - 1) * q.page_size
        return SearchPage(
            results=full[start:start + q.page_size],
            facet_counts=self.facet_counts(q),
            total=len(full), page=q.page, page_size=q.page_size)


def _make_snippet(doc: IndexDocument, terms: list[str]) -> tuple[str, list[tuple[int, int]], list[str]]:
    """Pick the first field containing a query term and mark term offsets."""
    term_set = set(terms)
    for name in ("title", "description", "subjects", "tags", "comments_text"):
        text = doc.field_text(name)
        offsets = [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)
                   if m.group(0).lower() in term_set]
        if offsets:
            matched = sorted({text[a:b].lower() for a, b in offsets})
            return text[:300], [(a, b) for a, b in offsets if a < 300], matched
    return (doc.title or doc.description)[:300], [], []


def federated_search(q: QuerySpec, index: SearchIndex,
                     provider: LiveWebProvider | None,
                     live_count: int = 10) -> SearchPage:
    """Archive hits first, then live-web hits not already in the archive
    block (deduplicated by normalized URL). Provider failure degrades to
    archive-only results with a warning flag."""
    archive_full = index.ranked(q)
    facets = index.facet_counts(q)

    live_entries: list[ResultEntry] = []
    warning = False
    if provider is not None:
        try:
            live_raw = provider.search(q.terms, q.media_type, live_count)
        except (ProviderUnavailable, OSError):
            live_raw = []
            warning = True
        seen = set()
        for entry in archive_full:
            try:
                seen.add(normalize_url(entry.url))
            except InvalidUrl:
                seen.add(entry.url)
        for item in live_raw:
            try:
                key = normalize_url(item.url)
            except InvalidUrl:
                key = item.url
            if key in seen:
                continue
            seen.add(key)
            live_entries.append(ResultEntry(
                kind="live", url=item.url, title=item.title,
                snippet=item.snippet, source_label="Live web"))

    combined = archive_full + live_entries
    start = (q.page - 1) * q.page_size
    return SearchPage(
        results=combined[start:start + q.page_size],
        facet_counts=facets, total=len(combined),
        page=q.page, page_size=q.page_size, provider_warning=warning)


class FixtureLiveProvider:
    """Deterministic provider backed by an in-memory corpus: returns entries
    whose title or snippet shares a token with the query."""

    def __init__(self, corpus: list[LiveResult]):
        self.corpus = list(corpus)
        self.enabled = True

    def search(self, terms: str, media_type: str | None, count: int) -> list[LiveResult]:
        if not self.enabled:
            raise ProviderUnavailable("fixture provider disabled")
        wanted = set(tokenize(terms))
        if not wanted:
            return self.corpus[:count]
        hits = [r for r in self.corpus
                if wanted & set(tokenize(r.title + " " + r.snippet))]
        return hits[:count]


class EndpointLiveProvider:
    """Generic HTTP JSON provider: GET {endpoint}?q=...&type=...&count=...
    expecting [{"url":..., "title":..., "snippet":...}, ...]."""

    def __init__(self, endpoint: str, transport) -> None:
        self.endpoint = endpoint
        self.transport = transport

    def search(self, terms: str, media_type: str | None, count: int) -> list[LiveResult]:
        from urllib.parse import urlencode

        from .errors import TransportError

        query = {"q": terms, "count": count}
        if media_type:
            query["type"] = media_type
        try:
            response = self.transport.get(f"{self.endpoint}?{urlencode(query)}")
        except TransportError as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if response.status != 200:
            raise ProviderUnavailable(f"provider returned HTTP {response.status}")
        try:
            items = json.loads(response.body.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise ProviderUnavailable(f"bad provider payload: {exc}") from exc
        return [LiveResult(i.get("url", ""), i.get("title", ""), i.get("snippet", ""))
                for i in items]
