"""Web-archive wire protocols: TimeMap (link-format) parsing and fetching,
CDX capture-index queries, on-demand archiving, and capture-timeline
aggregation.

Parsers and aggregators are pure; operations that hit the network take an
injected :class:`~webarc.transport.Transport`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from email.utils import format_datetime, parsedate_to_datetime
from urllib.parse import quote, urlencode, urljoin

from .errors import (
    InvalidUrl,
    MalformedLinkFormat,
    MalformedResponse,
    MissingOriginalRelation,
    TransportError,
    UnsupportedMediaType,
)
from .transport import Transport

LINK_FORMAT_MEDIA_TYPE = "application/link-format"


@dataclass(frozen=True)
class MementoEntry:
    uri: str
    datetime: datetime
    rel_markers: frozenset[str] = frozenset({"memento"})


@dataclass
class TimeMapDocument:
    original_uri: str
    timegate_uri: str | None = None
    self_uri: str | None = None
    mementos: list[MementoEntry] = field(default_factory=list)
    skipped_entries: int = 0  # entries dropped for unparsable datetimes


@dataclass(frozen=True)
class CdxCaptureLine:
    urlkey: str
    timestamp14: str
    original: str
    mimetype: str = ""
    statuscode: str = ""
    digest: str = ""
    length: int = 0

    @property
    def capture_datetime(self) -> datetime:
        return parse_timestamp14(self.timestamp14)


@dataclass(frozen=True)
class ArchiveStatus:
    status: str  # "never_indexed" | "indexed"
    first_capture: datetime | None = None
    last_capture: datetime | None = None


@dataclass(frozen=True)
class ArchiveReceipt:
    requested_url: str
    request_uri: str
    outcome: str  # "accepted" | "rate_limited" | "failed"
    capture_uri: str | None
    at: datetime


@dataclass(frozen=True)
class MonthBucket:
    month: str  # "YYYY-MM", UTC
    count: int


def parse_timestamp14(value: str) -> datetime:
    """Parse a 14-digit CDX timestamp into an aware UTC datetime."""
    if len(value) != 14 or not value.isdigit():
        raise MalformedResponse(f"bad 14-digit timestamp: {value!r}")
    try:
        return datetime.strptime(value, "%Y%m%d%H%M%S").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise MalformedResponse(f"bad 14-digit timestamp: {value!r}") from exc


def format_timestamp14(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y%m%d%H%M%S")


# -- link-format parsing ------------------------------------------------------

def _split_links(text: str) -> list[str]:
    """Split a link-format body into per-link chunks at top-level commas."""
    chunks: list[str] = []
    depth_angle = False
    in_quote = False
    current: list[str] = []
    for ch in text:
        if in_quote:
            current.append(ch)
            if ch == '"':
                in_quote = False
            continue
        if depth_angle:
            current.append(ch)
            if ch == ">":
                depth_angle = False
            elif ch == "<":
                raise MalformedLinkFormat("nested '<'")
            continue
        if ch == '"':
            in_quote = True
            current.append(ch)
        elif ch == "<":
            depth_angle = True
            current.append(ch)
        elif ch == ">":
            raise MalformedLinkFormat("unmatched '>'")
        elif ch == ",":
            chunks.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth_angle:
        raise MalformedLinkFormat("unclosed '<'")
    if in_quote:
        raise MalformedLinkFormat("unbalanced quote")
    tail = "".join(current)
    if tail.strip():
        chunks.append(tail)
    return [c for c in chunks if c.strip()]


def _parse_link(chunk: str) -> tuple[str, dict[str, str]]:
    chunk = chunk.strip()
    if not chunk.startswith("<"):
        raise MalformedLinkFormat(f"link does not start with '<': {chunk[:40]!r}")
    end = chunk.find(">")
    if end == -1:
        raise MalformedLinkFormat("unclosed '<'")
    uri = chunk[1:end].strip()
    params: dict[str, str] = {}
    rest = chunk[end + 1:]
    for part in _split_params(rest):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise MalformedLinkFormat(f"parameter without value: {part!r}")
        key, _, value = part.partition("=")
        value = value.strip()
        if value.startswith('"'):
            if not value.endswith('"') or len(value) < 2:
                raise MalformedLinkFormat(f"unbalanced quote in {part!r}")
            value = value[1:-1]
        params[key.strip().lower()] = value
    return uri, params


def _split_params(text: str) -> list[str]:
    parts: list[str] = []
    in_quote = False
    current: list[str] = []
    for ch in text:
        if ch == '"':
            in_quote = not in_quote
            current.append(ch)
        elif ch == ";" and not in_quote:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if in_quote:
        raise MalformedLinkFormat("unbalanced quote")
    parts.append("".join(current))
    return parts


def parse_timemap(body: bytes, declared_media_type: str) -> TimeMapDocument:
    """Parse an application/link-format TimeMap body.

    Entries whose Memento-Datetime does not parse as RFC 1123 are skipped
    and tallied in ``skipped_entries`` rather than failing the document;
    archives contain dirty data. A body with no rel="original" link is a
    parse error.
    """
    base_type = declared_media_type.split(";")[0].strip().lower()
    if base_type != LINK_FORMAT_MEDIA_TYPE:
        raise UnsupportedMediaType(declared_media_type)
    text = body.decode("utf-8", errors="replace")

    original_uri: str | None = None
    timegate_uri: str | None = None
    self_uri: str | None = None
    mementos: list[MementoEntry] = []
    skipped = 0

    for chunk in _split_links(text):
        uri, params = _parse_link(chunk)
        rels = set(params.get("rel", "").split())
        if "original" in rels:
            original_uri = uri
        if "timegate" in rels:
            timegate_uri = uri
        if "self" in rels:
            self_uri = uri
        if "memento" in rels:
            raw_dt = params.get("datetime")
            try:
                if raw_dt is None:
                    raise ValueError("missing datetime")
                dt = parsedate_to_datetime(raw_dt)
                if dt.tzinfo is None:
                    dt = dt.replace(tzinfo=timezone.utc)
                dt = dt.astimezone(timezone.utc)
            except (ValueError, TypeError):
                skipped += 1
                continue
            if not uri:
                skipped += 1
                continue
            markers = frozenset(rels & {"first", "last", "memento"})
            mementos.append(MementoEntry(uri=uri, datetime=dt, rel_markers=markers))

    if original_uri is None:
        raise MissingOriginalRelation("no rel=\"original\" link in TimeMap")
    mementos.sort(key=lambda m: (m.datetime, m.uri))
    return TimeMapDocument(
        original_uri=original_uri,
        timegate_uri=timegate_uri,
        self_uri=self_uri,
        mementos=mementos,
        skipped_entries=skipped,
    )


def serialize_timemap(doc: TimeMapDocument) -> bytes:
    """Emit the canonical link-format form (reparsing yields an equal doc)."""
    lines = [f'<{doc.original_uri}>; rel="original"']
    if doc.timegate_uri:
        lines.append(f'<{doc.timegate_uri}>; rel="timegate"')
    if doc.self_uri:
        lines.append(f'<{doc.self_uri}>; rel="self"; type="{LINK_FORMAT_MEDIA_TYPE}"')
    for entry in doc.mementos:
        rel = " ".join(sorted(entry.rel_markers - {"memento"})) or ""
        rel = (rel + " memento").strip()
        stamp = format_datetime(entry.datetime, usegmt=True)
        lines.append(f'<{entry.uri}>; rel="{rel}"; datetime="{stamp}"')
    return (",\n".join(lines) + "\n").encode("utf-8")


def fetch_timemap(timemap_base: str, original_url: str, transport: Transport) -> TimeMapDocument:
    """GET {timemap_base}/timemap/link/{original_url} and parse the body.

    404 means the archive never crawled the seed: an empty TimeMap, not an
    error.
    """
    request_uri = f"{timemap_base.rstrip('/')}/timemap/link/{original_url}"
    response = transport.get(request_uri)
    if response.status == 404:
        return TimeMapDocument(original_uri=original_url)
    if response.status != 200:
        raise TransportError(f"TimeMap fetch failed: HTTP {response.status} for {request_uri}")
    media_type = response.header("Content-Type") or LINK_FORMAT_MEDIA_TYPE
    return parse_timemap(response.body, media_type)


# -- CDX ----------------------------------------------------------------------

_CDX_FIELD_MAP = {
    "urlkey": "urlkey",
    "timestamp": "timestamp14",
    "original": "original",
    "mimetype": "mimetype",
    "statuscode": "statuscode",
    "digest": "digest",
    "length": "length",
}
_CDX_REQUIRED = {"timestamp", "original"}


def parse_cdx_response(body: bytes) -> list[CdxCaptureLine]:
    """Decode the CDX server's array-of-arrays JSON output.

    The first row names the fields; unrecognized columns are ignored,
    missing required columns are an error. An empty body or empty array
    means the URL was never indexed.
    """
    text = body.decode("utf-8", errors="replace").strip()
    if not text:
        return []
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"CDX body is not JSON: {exc}") from exc
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise MalformedResponse("CDX body is not an array of arrays")
    if not rows:
        return []

    header = [str(h) for h in rows[0]]
    missing = _CDX_REQUIRED - set(header)
    if missing:
        raise MalformedResponse(f"CDX header missing required columns: {sorted(missing)}")

    lines: list[CdxCaptureLine] = []
    for row in rows[1:]:
        if len(row) != len(header):
            raise MalformedResponse(f"CDX row width {len(row)} != header width {len(header)}")
        values = {}
        for name, cell in zip(header, row):
            attr = _CDX_FIELD_MAP.get(name)
            if attr is None:
                continue
            values[attr] = int(cell) if attr == "length" else str(cell)
        parse_timestamp14(values["timestamp14"])  # validates; raises MalformedResponse
        lines.append(CdxCaptureLine(urlkey=values.get("urlkey", ""), **{
            k: v for k, v in values.items() if k != "urlkey"
        }))
    return lines


def cdx_query_url(cdx_base: str, url: str, limit: int) -> str:
    query = urlencode({
        "url": url,
        "output": "json",
        "limit": limit,
        "fl": "timestamp,original,statuscode",
    })
    return f"{cdx_base}?{query}"


def archive_status(url: str, transport: Transport, cdx_base: str) -> ArchiveStatus:
    """Look up whether an archive has ever indexed ``url``.

    Issues two bounded queries (earliest capture with limit=1, latest with
    limit=-1). Transport errors propagate so callers can distinguish "not
    indexed" from "lookup failed".
    """
    first_resp = transport.get(cdx_query_url(cdx_base, url, 1))
    if first_resp.status >= 400:
        raise TransportError(f"CDX lookup failed: HTTP {first_resp.status}")
    earliest = parse_cdx_response(first_resp.body)
    if not earliest:
        return ArchiveStatus(status="never_indexed")

    last_resp = transport.get(cdx_query_url(cdx_base, url, -1))
    if last_resp.status >= 400:
        raise TransportError(f"CDX lookup failed: HTTP {last_resp.status}")
    latest = parse_cdx_response(last_resp.body) or earliest
    return ArchiveStatus(
        status="indexed",
        first_capture=earliest[0].capture_datetime,
        last_capture=latest[-1].capture_datetime,
    )


# -- on-demand archiving ------------------------------------------------------

def request_archive_now(url: str, transport: Transport, save_base: str,
                        now: datetime | None = None) -> ArchiveReceipt:
    """Ask the archive to capture ``url`` right now (save-page-now style)."""
    from urllib.parse import urlsplit

    scheme = urlsplit(url).scheme.lower()
    if scheme not in ("http", "https"):
        raise InvalidUrl(f"archive-now requires an http(s) URL: {url!r}")
    request_uri = f"{save_base.rstrip('/')}/save/{url}"
    response = transport.get(request_uri)
    if now is None:
        now = datetime.now(timezone.utc).replace(microsecond=0)
    if 200 <= response.status < 300:
        capture_uri = response.header("Content-Location")
        if capture_uri:
            capture_uri = urljoin(save_base, capture_uri)
        return ArchiveReceipt(url, request_uri, "accepted", capture_uri, now)
    if response.status == 429:
        return ArchiveReceipt(url, request_uri, "rate_limited", None, now)
    return ArchiveReceipt(url, request_uri, "failed", None, now)


# -- timeline aggregation -----------------------------------------------------

def _capture_datetime(item) -> datetime:
    dt = item if isinstance(item, datetime) else item.capture_datetime
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def aggregate_captures_by_month(captures) -> list[MonthBucket]:
    """Count captures per UTC calendar month, ascending, gaps omitted."""
    counts: dict[str, int] = {}
    for item in captures:
        dt = _capture_datetime(item)
        counts[f"{dt.year:04d}-{dt.month:02d}"] = counts.get(f"{dt.year:04d}-{dt.month:02d}", 0) + 1
    return [MonthBucket(month, counts[month]) for month in sorted(counts)]


def capture_span(captures) -> tuple[datetime | None, datetime | None, int]:
    """(earliest, latest, count); (None, None, 0) for an empty list."""
    datetimes = [_capture_datetime(item) for item in captures]
    if not datetimes:
        return (None, None, 0)
    return (min(datetimes), max(datetimes), len(datetimes))
