"""Core entities, persistence, and curation operations.

Everything lives in a single embedded sqlite store (WAL mode) under a
storage directory with a schema-version file. Mutating operations run
under one serialized writer lock; each successful mutation emits exactly
one activity-log entry. Ingested groups are read-only mirrors: every
mutation against them fails with ReadOnlyGroup and leaves state untouched
(ingestion itself goes through a privileged path).
"""

from __future__ import annotations

import json
import sqlite3
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    AlreadyMember,
    DuplicateTag,
    DuplicateUrlInGroup,
    EmptyTitle,
    EmptyValue,
    FieldNotEditable,
    FewerThanTwoSources,
    NestingTooDeep,
    NotAMember,
    ReadOnlyGroup,
    SoleOwnerCannotLeave,
    UnknownGroup,
    UnknownResource,
    UnknownUser,
)
from .urlnorm import normalize_tag, normalize_url

SCHEMA_VERSION = 1

MEDIA_TYPES = {"webpage", "image", "video", "file"}
SOURCES = {"archive_collection", "live_web", "upload"}
AVAILABILITY = {"live", "gone", "unknown"}

ACTION_TYPES = {
    "tag_added", "tag_removed", "comment_added", "search_executed",
    "resource_added", "resource_edited", "resource_deleted",
    "resource_moved", "resource_copied", "group_created", "group_joined",
    "group_left", "group_edited", "group_merged", "group_copied",
    "subgroup_created", "subgroup_deleted", "archive_now_requested",
    "export_performed",
}

EDITABLE_RESOURCE_FIELDS = {
    "title", "description", "subjects", "creator", "publisher",
    "language", "format", "resource_type", "media_type",
}


def utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _new_id() -> str:
    return uuid.uuid4().hex


def _iso(dt: datetime | None) -> str | None:
    if dt is None:
        return None
    return dt.astimezone(timezone.utc).replace(microsecond=0).isoformat()


def parse_iso(value: str | None) -> datetime | None:
    if value is None:
        return None
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class UserAccount:
    id: str
    username: str
    display_name: str
    role: str  # admin | curator | member


@dataclass(frozen=True)
class Group:
    id: str
    title: str
    description: str
    origin: str  # ingested | user_created
    read_only: bool
    created_by: str
    created_at: datetime
    parent_group: str | None = None
    source_external_id: str | None = None
    source_portal_link: str | None = None
    collecting_institution: str | None = None
    subjects: tuple[str, ...] = ()
    collectors: tuple[str, ...] = ()
    public: bool = False


@dataclass(frozen=True)
class Resource:
    id: str
    group_id: str
    url: str
    original_url: str
    added_by: str
    added_at: datetime
    subgroup_id: str | None = None
    title: str = ""
    description: str = ""
    subjects: tuple[str, ...] = ()
    collector: str = ""
    creator: str = ""
    publisher: str = ""
    language: str = ""
    format: str = ""
    resource_type: str = ""
    media_type: str = "webpage"
    source: str = "archive_collection"
    thumbnail_ref: str | None = None
    availability: str = "unknown"


@dataclass(frozen=True)
class CaptureRecord:
    resource_id: str
    capture_datetime: datetime
    capture_uri: str
    provenance: str = "ingested_archive"  # or on_demand_archive


@dataclass(frozen=True)
class Annotation:
    id: str
    resource_id: str
    author: str
    text: str
    created_at: datetime


@dataclass(frozen=True)
class TagAssignment:
    resource_id: str
    tag: str
    author: str
    created_at: datetime


@dataclass(frozen=True)
class Membership:
    user: str
    group: str
    member_role: str  # owner | member
    joined_at: datetime


@dataclass(frozen=True)
class ActivityLogEntry:
    id: int
    actor: str
    action_type: str
    subject_type: str  # group | resource | query
    subject_id: str
    timestamp: datetime
    details: dict[str, str] = field(default_factory=dict)
    group_id: str | None = None


@dataclass(frozen=True)
class CrawlCursor:
    external_id: str
    last_crawled_at: datetime
    latest_capture_at: datetime | None = None


@dataclass
class ResourceData:
    """Incoming resource fields before persistence (url not yet normalized)."""
    original_url: str
    title: str = ""
    description: str = ""
    subjects: list[str] = field(default_factory=list)
    collector: str = ""
    creator: str = ""
    publisher: str = ""
    language: str = ""
    format: str = ""
    resource_type: str = ""
    media_type: str = "webpage"
    source: str = "archive_collection"
    availability: str = "unknown"


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    id TEXT PRIMARY KEY,
    username TEXT NOT NULL UNIQUE,
    display_name TEXT NOT NULL,
    role TEXT NOT NULL,
    password_salt BLOB,
    password_hash BLOB
);
CREATE TABLE IF NOT EXISTS groups (
    id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    origin TEXT NOT NULL,
    read_only INTEGER NOT NULL,
    parent_group TEXT REFERENCES groups(id),
    created_by TEXT NOT NULL,
    created_at TEXT NOT NULL,
    source_external_id TEXT,
    source_portal_link TEXT,
    collecting_institution TEXT,
    subjects TEXT NOT NULL DEFAULT '[]',
    collectors TEXT NOT NULL DEFAULT '[]',
    public INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS resources (
    id TEXT PRIMARY KEY,
    group_id TEXT NOT NULL REFERENCES groups(id),
    subgroup_id TEXT REFERENCES groups(id),
    url TEXT NOT NULL,
    original_url TEXT NOT NULL,
    title TEXT NOT NULL DEFAULT '',
    description TEXT NOT NULL DEFAULT '',
    subjects TEXT NOT NULL DEFAULT '[]',
    collector TEXT NOT NULL DEFAULT '',
    creator TEXT NOT NULL DEFAULT '',
    publisher TEXT NOT NULL DEFAULT '',
    language TEXT NOT NULL DEFAULT '',
    format TEXT NOT NULL DEFAULT '',
    resource_type TEXT NOT NULL DEFAULT '',
    media_type TEXT NOT NULL DEFAULT 'webpage',
    source TEXT NOT NULL DEFAULT 'archive_collection',
    added_by TEXT NOT NULL,
    added_at TEXT NOT NULL,
    thumbnail_ref TEXT,
    availability TEXT NOT NULL DEFAULT 'unknown',
    UNIQUE (group_id, url)
);
CREATE TABLE IF NOT EXISTS captures (
    resource_id TEXT NOT NULL REFERENCES resources(id),
    capture_datetime TEXT NOT NULL,
    capture_uri TEXT NOT NULL,
    provenance TEXT NOT NULL,
    UNIQUE (resource_id, capture_datetime, capture_uri)
);
CREATE TABLE IF NOT EXISTS annotations (
    id TEXT PRIMARY KEY,
    resource_id TEXT NOT NULL REFERENCES resources(id),
    author TEXT NOT NULL,
    text TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tags (
    resource_id TEXT NOT NULL REFERENCES resources(id),
    tag TEXT NOT NULL,
    author TEXT NOT NULL,
    created_at TEXT NOT NULL,
    UNIQUE (resource_id, tag)
);
CREATE TABLE IF NOT EXISTS memberships (
    user_id TEXT NOT NULL REFERENCES users(id),
    group_id TEXT NOT NULL REFERENCES groups(id),
    member_role TEXT NOT NULL,
    joined_at TEXT NOT NULL,
    UNIQUE (user_id, group_id)
);
CREATE TABLE IF NOT EXISTS activity (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    actor TEXT NOT NULL,
    action_type TEXT NOT NULL,
    subject_type TEXT NOT NULL,
    subject_id TEXT NOT NULL,
    group_id TEXT,
    timestamp TEXT NOT NULL,
    details TEXT NOT NULL DEFAULT '{}'
);
CREATE TABLE IF NOT EXISTS cursors (
    external_id TEXT PRIMARY KEY,
    last_crawled_at TEXT NOT NULL,
    latest_capture_at TEXT
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id TEXT NOT NULL REFERENCES users(id),
    expires_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_resources_group ON resources(group_id);
CREATE INDEX IF NOT EXISTS idx_captures_resource ON captures(resource_id);
CREATE INDEX IF NOT EXISTS idx_activity_group ON activity(group_id);
"""


class DomainStore:
    """Embedded transactional store for the whole curation domain.

    ``clock`` is injectable so tests can freeze time. ``index_listeners``
    receive ("upsert"|"delete", resource_id) after each commit that changes
    a resource's searchable state; the search index subscribes here.
    """

    def __init__(self, storage_path: str | Path | None = None,
                 clock: Callable[[], datetime] = utcnow):
        self.clock = clock
        self.index_listeners: list[Callable[[str, str], None]] = []
        self._lock = threading.RLock()
        if storage_path is None:
            self._conn = sqlite3.connect(":memory:", check_same_thread=False)
        else:
            storage_path = Path(storage_path)
            storage_path.mkdir(parents=True, exist_ok=True)
            version_file = storage_path / "SCHEMA_VERSION"
            if version_file.exists():
                on_disk = int(version_file.read_text().strip())
                if on_disk > SCHEMA_VERSION:
                    raise RuntimeError(
                        f"store schema v{on_disk} is newer than supported v{SCHEMA_VERSION}")
            version_file.write_text(f"{SCHEMA_VERSION}\n")
            self._conn = sqlite3.connect(storage_path / "domain.db", check_same_thread=False)
            self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA foreign_keys=ON")
        with self._conn:
            self._conn.executescript(_SCHEMA)
            self._conn.execute(f"PRAGMA user_version={SCHEMA_VERSION}")

    def close(self) -> None:
        self._conn.close()

    # -- event plumbing -------------------------------------------------------

    def _emit_index(self, kind: str, resource_id: str) -> None:
        for listener in self.index_listeners:
            listener(kind, resource_id)

    def _log(self, cur: sqlite3.Cursor, actor: str, action_type: str,
             subject_type: str, subject_id: str, group_id: str | None,
             details: dict[str, str] | None = None) -> int:
        assert action_type in ACTION_TYPES
        cur.execute(
            "INSERT INTO activity (actor, action_type, subject_type, subject_id,"
            " group_id, timestamp, details) VALUES (?,?,?,?,?,?,?)",
            (actor, action_type, subject_type, subject_id, group_id,
             _iso(self.clock()), json.dumps(details or {}, sort_keys=True)))
        return cur.lastrowid

    # -- users ----------------------------------------------------------------

    def create_user(self, username: str, display_name: str = "", role: str = "member",
                    password: str | None = None) -> UserAccount:
        if not username.strip():
            raise EmptyValue("username must be non-empty")
        salt = hash_ = None
        if password is not None:
            salt, hash_ = _hash_password(password)
        user = UserAccount(_new_id(), username, display_name or username, role)
        with self._lock, self._conn:
            try:
                self._conn.execute(
                    "INSERT INTO users VALUES (?,?,?,?,?,?)",
                    (user.id, user.username, user.display_name, user.role, salt, hash_))
            except sqlite3.IntegrityError as exc:
                raise EmptyValue(f"username already taken: {username}") from exc
        return user

    def get_user(self, user_id: str) -> UserAccount:
        row = self._conn.execute("SELECT * FROM users WHERE id=?", (user_id,)).fetchone()
        if row is None:
            raise UnknownUser(user_id)
        return UserAccount(row["id"], row["username"], row["display_name"], row["role"])

    def find_user(self, username: str) -> UserAccount | None:
        row = self._conn.execute("SELECT * FROM users WHERE username=?", (username,)).fetchone()
        if row is None:
            return None
        return UserAccount(row["id"], row["username"], row["display_name"], row["role"])

    def verify_credentials(self, username: str, password: str) -> UserAccount | None:
        """Constant-shape check: hashing happens whether or not the user exists."""
        import hmac

        row = self._conn.execute(
            "SELECT * FROM users WHERE username=?", (username,)).fetchone()
        salt = row["password_salt"] if row is not None else b"\x00" * 16
        expected = row["password_hash"] if row is not None else b"\x00" * 32
        if salt is None or expected is None:
            salt, expected = b"\x00" * 16, b"\x00" * 32
            row = None
        _, actual = _hash_password(password, salt)
        if hmac.compare_digest(actual, expected) and row is not None:
            return UserAccount(row["id"], row["username"], row["display_name"], row["role"])
        return None

    # -- groups ---------------------------------------------------------------

    def _group_row(self, group_id: str) -> sqlite3.Row:
        row = self._conn.execute("SELECT * FROM groups WHERE id=?", (group_id,)).fetchone()
        if row is None:
            raise UnknownGroup(group_id)
        return row

    def _to_group(self, row: sqlite3.Row) -> Group:
        return Group(
            id=row["id"], title=row["title"], description=row["description"],
            origin=row["origin"], read_only=bool(row["read_only"]),
            parent_group=row["parent_group"], created_by=row["created_by"],
            created_at=parse_iso(row["created_at"]),
            source_external_id=row["source_external_id"],
            source_portal_link=row["source_portal_link"],
            collecting_institution=row["collecting_institution"],
            subjects=tuple(json.loads(row["subjects"])),
            collectors=tuple(json.loads(row["collectors"])),
            public=bool(row["public"]))

    def get_group(self, group_id: str) -> Group:
        return self._to_group(self._group_row(group_id))

    def list_groups(self, include_subgroups: bool = False) -> list[Group]:
        sql = "SELECT * FROM groups"
        if not include_subgroups:
            sql += " WHERE parent_group IS NULL"
        return [self._to_group(r) for r in self._conn.execute(sql + " ORDER BY title")]

    def list_subgroups(self, group_id: str) -> list[Group]:
        rows = self._conn.execute(
            "SELECT * FROM groups WHERE parent_group=? ORDER BY title", (group_id,))
        return [self._to_group(r) for r in rows]

    def _top_level_group_id(self, group_id: str) -> str:
        row = self._group_row(group_id)
        return row["parent_group"] or row["id"]

    def _require_member(self, user_id: str, group_id: str) -> None:
        top = self._top_level_group_id(group_id)
        row = self._conn.execute(
            "SELECT 1 FROM memberships WHERE user_id=? AND group_id=?",
            (user_id, top)).fetchone()
        if row is None:
            raise NotAMember(f"user {user_id} is not a member of group {top}")

    def _require_writable(self, group_id: str) -> sqlite3.Row:
        row = self._group_row(group_id)
        if row["read_only"]:
            raise ReadOnlyGroup(group_id)
        return row

    def create_group(self, title: str, description: str, creator: str,
                     public: bool = False) -> Group:
        if not title.strip():
            raise EmptyTitle("group title must be non-empty")
        self.get_user(creator)
        now = self.clock()
        group = Group(
            id=_new_id(), title=title, description=description,
            origin="user_created", read_only=False, created_by=creator,
            created_at=now, public=public)
        with self._lock, self._conn:
            cur = self._conn.cursor()
            self._insert_group(cur, group)
            cur.execute("INSERT INTO memberships VALUES (?,?,?,?)",
                        (creator, group.id, "owner", _iso(now)))
            self._log(cur, creator, "group_created", "group", group.id, group.id,
                      {"title": title})
        return group

    def _insert_group(self, cur: sqlite3.Cursor, group: Group) -> None:
        cur.execute(
            "INSERT INTO groups (id, title, description, origin, read_only,"
            " parent_group, created_by, created_at, source_external_id,"
            " source_portal_link, collecting_institution, subjects, collectors,"
            " public) VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
            (group.id, group.title, group.description, group.origin,
             int(group.read_only), group.parent_group, group.created_by,
             _iso(group.created_at), group.source_external_id,
             group.source_portal_link, group.collecting_institution,
             json.dumps(list(group.subjects)), json.dumps(list(group.collectors)),
             int(group.public)))

    def create_ingested_group(self, title: str, description: str, creator: str,
                              external_id: str, portal_link: str | None = None,
                              institution: str | None = None,
                              subjects: Iterable[str] = (),
                              collectors: Iterable[str] = ()) -> Group:
        """Privileged path: read-only mirror of an external collection.

        Idempotent per external_id: re-ingesting returns the existing group.
        """
        if not title.strip():
            raise EmptyTitle("collection title must be non-empty")
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT * FROM groups WHERE source_external_id=?", (external_id,)).fetchone()
            if row is not None:
                return self._to_group(row)
            group = Group(
                id=_new_id(), title=title, description=description,
                origin="ingested", read_only=True, created_by=creator,
                created_at=self.clock(), source_external_id=external_id,
                source_portal_link=portal_link, collecting_institution=institution,
                subjects=tuple(subjects), collectors=tuple(collectors), public=True)
            self._insert_group(self._conn.cursor(), group)
        return group

    def find_group_by_external_id(self, external_id: str) -> Group | None:
        row = self._conn.execute(
            "SELECT * FROM groups WHERE source_external_id=?", (external_id,)).fetchone()
        return self._to_group(row) if row is not None else None

    def set_membership(self, user: str, group: str, action: str) -> Membership | None:
        self.get_user(user)
        self._group_row(group)
        with self._lock, self._conn:
            cur = self._conn.cursor()
            existing = cur.execute(
                "SELECT * FROM memberships WHERE user_id=? AND group_id=?",
                (user, group)).fetchone()
            if action == "join":
                if existing is not None:
                    raise AlreadyMember(f"{user} already in {group}")
                now = self.clock()
                cur.execute("INSERT INTO memberships VALUES (?,?,?,?)",
                            (user, group, "member", _iso(now)))
                self._log(cur, user, "group_joined", "group", group, group)
                return Membership(user, group, "member", now)
            if action == "leave":
                if existing is None:
                    raise NotAMember(f"{user} not in {group}")
                if existing["member_role"] == "owner":
                    owners = cur.execute(
                        "SELECT COUNT(*) FROM memberships WHERE group_id=? AND member_role='owner'",
                        (group,)).fetchone()[0]
                    if owners <= 1:
                        raise SoleOwnerCannotLeave(group)
                cur.execute("DELETE FROM memberships WHERE user_id=? AND group_id=?",
                            (user, group))
                self._log(cur, user, "group_left", "group", group, group)
                return None
            raise EmptyValue(f"unknown membership action: {action}")

    def list_memberships(self, group: str | None = None, user: str | None = None) -> list[Membership]:
        sql, args = "SELECT * FROM memberships", []
        clauses = []
        if group is not None:
            clauses.append("group_id=?")
            args.append(group)
        if user is not None:
            clauses.append("user_id=?")
            args.append(user)
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        return [Membership(r["user_id"], r["group_id"], r["member_role"],
                           parse_iso(r["joined_at"]))
                for r in self._conn.execute(sql, args)]

    def find_groups(self, text: str) -> list[Group]:
        """Case-insensitive substring filter over title OR description."""
        needle = text.lower()
        groups = [g for g in self.list_groups()
                  if needle in g.title.lower() or needle in g.description.lower()]
        return sorted(groups, key=lambda g: (g.title, g.id))

    # -- resources ------------------------------------------------------------

    def _resource_row(self, resource_id: str) -> sqlite3.Row:
        row = self._conn.execute("SELECT * FROM resources WHERE id=?", (resource_id,)).fetchone()
        if row is None:
            raise UnknownResource(resource_id)
        return row

    def _to_resource(self, row: sqlite3.Row) -> Resource:
        return Resource(
            id=row["id"], group_id=row["group_id"], subgroup_id=row["subgroup_id"],
            url=row["url"], original_url=row["original_url"], title=row["title"],
            description=row["description"], subjects=tuple(json.loads(row["subjects"])),
            collector=row["collector"], creator=row["creator"],
            publisher=row["publisher"], language=row["language"],
            format=row["format"], resource_type=row["resource_type"],
            media_type=row["media_type"], source=row["source"],
            added_by=row["added_by"], added_at=parse_iso(row["added_at"]),
            thumbnail_ref=row["thumbnail_ref"], availability=row["availability"])

    def get_resource(self, resource_id: str) -> Resource:
        return self._to_resource(self._resource_row(resource_id))

    def list_resources(self, group_id: str, subgroup_id: str | None = None) -> list[Resource]:
        if subgroup_id is not None:
            rows = self._conn.execute(
                "SELECT * FROM resources WHERE group_id=? AND subgroup_id=? ORDER BY added_at, id",
                (group_id, subgroup_id))
        else:
            rows = self._conn.execute(
                "SELECT * FROM resources WHERE group_id=? ORDER BY added_at, id", (group_id,))
        return [self._to_resource(r) for r in rows]

    def add_resource(self, group: str, data: ResourceData,
                     captures: Iterable[CaptureRecord] = (), actor: str = "",
                     privileged: bool = False) -> Resource:
        """Add a seed to a group (or subgroup). Ingestion passes privileged=True
        to write into read-only mirrors; everyone else needs membership and a
        writable group."""
        row = self._group_row(group)
        top_group = row["parent_group"] or row["id"]
        subgroup = row["id"] if row["parent_group"] else None
        if not privileged:
            if row["read_only"]:
                raise ReadOnlyGroup(group)
            self._require_member(actor, group)
        url = normalize_url(data.original_url)
        now = self.clock()
        resource = Resource(
            id=_new_id(), group_id=top_group, subgroup_id=subgroup, url=url,
            original_url=data.original_url, title=data.title,
            description=data.description, subjects=tuple(data.subjects),
            collector=data.collector, creator=data.creator,
            publisher=data.publisher, language=data.language, format=data.format,
            resource_type=data.resource_type, media_type=data.media_type,
            source=data.source, added_by=actor, added_at=now,
            availability=data.availability)
        with self._lock, self._conn:
            cur = self._conn.cursor()
            try:
                self._insert_resource(cur, resource)
            except sqlite3.IntegrityError as exc:
                raise DuplicateUrlInGroup(f"{url} already in group {top_group}") from exc
            for capture in captures:
                self._insert_capture(cur, resource.id, capture)
            if not privileged:
                self._log(cur, actor, "resource_added", "resource", resource.id,
                          top_group, {"url": url})
        self._emit_index("upsert", resource.id)
        return resource

    def _insert_resource(self, cur: sqlite3.Cursor, r: Resource) -> None:
        cur.execute(
            "INSERT INTO resources (id, group_id, subgroup_id, url, original_url,"
            " title, description, subjects, collector, creator, publisher,"
            " language, format, resource_type, media_type, source, added_by,"
            " added_at, thumbnail_ref, availability)"
            " VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
            (r.id, r.group_id, r.subgroup_id, r.url, r.original_url, r.title,
             r.description, json.dumps(list(r.subjects)), r.collector, r.creator,
             r.publisher, r.language, r.format, r.resource_type, r.media_type,
             r.source, r.added_by, _iso(r.added_at), r.thumbnail_ref,
             r.availability))

    def _insert_capture(self, cur: sqlite3.Cursor, resource_id: str,
                        capture: CaptureRecord) -> bool:
        if capture.capture_datetime > self.clock():
            raise EmptyValue("capture datetime is in the future")
        result = cur.execute(
            "INSERT OR IGNORE INTO captures VALUES (?,?,?,?)",
            (resource_id, _iso(capture.capture_datetime), capture.capture_uri,
             capture.provenance))
        return result.rowcount > 0

    def add_captures(self, resource_id: str, captures: Iterable[CaptureRecord],
                     privileged: bool = False, actor: str = "") -> int:
        """Append capture records, deduplicating on (datetime, uri). Returns
        the number actually added."""
        self._resource_row(resource_id)
        added = 0
        with self._lock, self._conn:
            cur = self._conn.cursor()
            for capture in captures:
                if self._insert_capture(cur, resource_id, capture):
                    added += 1
        if added:
            self._emit_index("upsert", resource_id)
        return added

    def list_captures(self, resource_id: str) -> list[CaptureRecord]:
        rows = self._conn.execute(
            "SELECT * FROM captures WHERE resource_id=? ORDER BY capture_datetime, capture_uri",
            (resource_id,))
        return [CaptureRecord(r["resource_id"], parse_iso(r["capture_datetime"]),
                              r["capture_uri"], r["provenance"]) for r in rows]

    def edit_resource_metadata(self, resource_id: str, changes: dict, actor: str,
                               privileged: bool = False) -> Resource:
        row = self._resource_row(resource_id)
        group_row = self._group_row(row["group_id"])
        if not privileged:
            if group_row["read_only"]:
                raise ReadOnlyGroup(row["group_id"])
            self._require_member(actor, row["group_id"])
        allowed = EDITABLE_RESOURCE_FIELDS | ({"collector"} if privileged else set())
        bad = set(changes) - allowed
        if bad:
            raise FieldNotEditable(f"fields not editable: {sorted(bad)}")
        if not changes:
            return self._to_resource(row)
        assignments, args = [], []
        for field_name, value in changes.items():
            assignments.append(f"{field_name}=?")
            args.append(json.dumps(list(value)) if field_name == "subjects" else value)
        args.append(resource_id)
        with self._lock, self._conn:
            cur = self._conn.cursor()
            cur.execute(f"UPDATE resources SET {', '.join(assignments)} WHERE id=?", args)
            if not privileged:
                self._log(cur, actor, "resource_edited", "resource", resource_id,
                          row["group_id"], {"fields": ",".join(sorted(changes))})
        self._emit_index("upsert", resource_id)
        return self.get_resource(resource_id)

    def set_thumbnail(self, resource_id: str, thumbnail_ref: str | None,
                      availability: str) -> None:
        assert availability in AVAILABILITY
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE resources SET thumbnail_ref=?, availability=? WHERE id=?",
                (thumbnail_ref, availability, resource_id))

    def remove_resource(self, resource_id: str, actor: str) -> None:
        row = self._resource_row(resource_id)
        group_row = self._group_row(row["group_id"])
        if group_row["read_only"]:
            raise ReadOnlyGroup(row["group_id"])
        self._require_member(actor, row["group_id"])
        with self._lock, self._conn:
            cur = self._conn.cursor()
            cur.execute("DELETE FROM captures WHERE resource_id=?", (resource_id,))
            cur.execute("DELETE FROM annotations WHERE resource_id=?", (resource_id,))
            cur.execute("DELETE FROM tags WHERE resource_id=?", (resource_id,))
            cur.execute("DELETE FROM resources WHERE id=?", (resource_id,))
            self._log(cur, actor, "resource_deleted", "resource", resource_id,
                      row["group_id"], {"url": row["url"]})
        self._emit_index("delete", resource_id)

    def transfer_resource(self, resource_id: str, target_group: str, mode: str,
                          actor: str) -> Resource:
        assert mode in ("copy", "move")
        row = self._resource_row(resource_id)
        target_row = self._group_row(target_group)
        target_top = target_row["parent_group"] or target_row["id"]
        target_sub = target_row["id"] if target_row["parent_group"] else None
        if target_row["read_only"]:
            raise ReadOnlyGroup(target_group)
        self._require_member(actor, target_group)
        if mode == "move":
            source_row = self._group_row(row["group_id"])
            if source_row["read_only"]:
                raise ReadOnlyGroup(row["group_id"])
            self._require_member(actor, row["group_id"])
        clash = self._conn.execute(
            "SELECT 1 FROM resources WHERE group_id=? AND url=? AND id!=?",
            (target_top, row["url"], resource_id)).fetchone()
        if clash is not None or (mode == "move" and row["group_id"] == target_top
                                 and row["subgroup_id"] == target_sub) or (
                mode == "copy" and row["group_id"] == target_top):
            raise DuplicateUrlInGroup(f"{row['url']} already in group {target_top}")

        with self._lock, self._conn:
            cur = self._conn.cursor()
            if mode == "move":
                cur.execute(
                    "UPDATE resources SET group_id=?, subgroup_id=? WHERE id=?",
                    (target_top, target_sub, resource_id))
                self._log(cur, actor, "resource_moved", "resource", resource_id,
                          target_top, {"from": row["group_id"], "to": target_top})
                new_id = resource_id
            else:
                new_id = self._copy_resource_into(cur, row, target_top, target_sub, actor)
                self._log(cur, actor, "resource_copied", "resource", new_id,
                          target_top, {"from": row["id"], "to": target_top})
        self._emit_index("upsert", new_id)
        return self.get_resource(new_id)

    def _copy_resource_into(self, cur: sqlite3.Cursor, row: sqlite3.Row,
                            group_id: str, subgroup_id: str | None, actor: str) -> str:
        """Duplicate a resource with captures, tags, and annotations; copied
        annotations keep their original authorship."""
        new_id = _new_id()
        source = self._to_resource(row)
        copy = replace(source, id=new_id, group_id=group_id, subgroup_id=subgroup_id,
                       added_by=actor or source.added_by, added_at=self.clock())
        self._insert_resource(cur, copy)
        cur.execute(
            "INSERT INTO captures SELECT ?, capture_datetime, capture_uri, provenance"
            " FROM captures WHERE resource_id=?", (new_id, row["id"]))
        cur.execute(
            "INSERT INTO tags SELECT ?, tag, author, created_at FROM tags"
            " WHERE resource_id=?", (new_id, row["id"]))
        for ann in self._conn.execute(
                "SELECT * FROM annotations WHERE resource_id=? ORDER BY rowid",
                (row["id"],)).fetchall():
            cur.execute("INSERT INTO annotations VALUES (?,?,?,?,?)",
                        (_new_id(), new_id, ann["author"], ann["text"], ann["created_at"]))
        return new_id

    # -- subgroups ------------------------------------------------------------

    def create_subgroup(self, parent: str, title: str, actor: str) -> Group:
        parent_row = self._group_row(parent)
        if parent_row["parent_group"] is not None:
            raise NestingTooDeep("subgroups cannot contain subgroups")
        if parent_row["read_only"]:
            raise ReadOnlyGroup(parent)
        self._require_member(actor, parent)
        if not title.strip():
            raise EmptyTitle("subgroup title must be non-empty")
        subgroup = Group(
            id=_new_id(), title=title, description="", origin="user_created",
            read_only=bool(parent_row["read_only"]), parent_group=parent,
            created_by=actor, created_at=self.clock())
        with self._lock, self._conn:
            cur = self._conn.cursor()
            self._insert_group(cur, subgroup)
            self._log(cur, actor, "subgroup_created", "group", subgroup.id, parent,
                      {"title": title})
        return subgroup

    def delete_subgroup(self, subgroup_id: str, actor: str) -> None:
        """Dissolve a subgroup; its resources move up into the parent group."""
        row = self._group_row(subgroup_id)
        parent = row["parent_group"]
        if parent is None:
            raise UnknownGroup(f"{subgroup_id} is not a subgroup")
        if row["read_only"]:
            raise ReadOnlyGroup(subgroup_id)
        self._require_member(actor, parent)
        with self._lock, self._conn:
            cur = self._conn.cursor()
            cur.execute("UPDATE resources SET subgroup_id=NULL WHERE subgroup_id=?",
                        (subgroup_id,))
            cur.execute("DELETE FROM groups WHERE id=?", (subgroup_id,))
            self._log(cur, actor, "subgroup_deleted", "group", subgroup_id, parent,
                      {"title": row["title"]})

    # -- merge / copy ---------------------------------------------------------

    def merge_groups(self, sources: list[str], new_title: str, actor: str) -> Group:
        """Union of all source resources deduplicated by normalized URL.

        First-listed source wins the metadata on collision; tags are unioned
        and annotations concatenated across duplicates. Sources are untouched.
        """
        if len(sources) < 2:
            raise FewerThanTwoSources(f"need at least 2 groups, got {len(sources)}")
        if not new_title.strip():
            raise EmptyTitle("merged group title must be non-empty")
        source_rows = [self._group_row(s) for s in sources]
        self.get_user(actor)
        now = self.clock()
        merged = Group(
            id=_new_id(), title=new_title, description="", origin="user_created",
            read_only=False, created_by=actor, created_at=now)
        new_ids: list[str] = []
        with self._lock, self._conn:
            cur = self._conn.cursor()
            self._insert_group(cur, merged)
            cur.execute("INSERT INTO memberships VALUES (?,?,?,?)",
                        (actor, merged.id, "owner", _iso(now)))
            by_url: dict[str, str] = {}
            for source_row in source_rows:
                for res in self._conn.execute(
                        "SELECT * FROM resources WHERE group_id=? ORDER BY added_at, id",
                        (source_row["id"],)).fetchall():
                    existing = by_url.get(res["url"])
                    if existing is None:
                        new_id = self._copy_resource_into(cur, res, merged.id, None, actor)
                        by_url[res["url"]] = new_id
                        new_ids.append(new_id)
                    else:
                        # duplicate URL: fold tags (set union) and annotations in
                        cur.execute(
                            "INSERT OR IGNORE INTO tags SELECT ?, tag, author,"
                            " created_at FROM tags WHERE resource_id=?",
                            (existing, res["id"]))
                        for ann in self._conn.execute(
                                "SELECT * FROM annotations WHERE resource_id=?"
                                " ORDER BY rowid", (res["id"],)).fetchall():
                            cur.execute(
                                "INSERT INTO annotations VALUES (?,?,?,?,?)",
                                (_new_id(), existing, ann["author"], ann["text"],
                                 ann["created_at"]))
            self._log(cur, actor, "group_merged", "group", merged.id, merged.id,
                      {"sources": ",".join(sources)})
        for new_id in new_ids:
            self._emit_index("upsert", new_id)
        return merged

    def copy_group(self, source: str, actor: str) -> Group:
        """Editable deep copy of a group: resources, captures, tags, and
        annotations (authorship preserved)."""
        source_row = self._group_row(source)
        self.get_user(actor)
        now = self.clock()
        copy = Group(
            id=_new_id(), title=source_row["title"],
            description=source_row["description"], origin="user_created",
            read_only=False, created_by=actor, created_at=now,
            collecting_institution=source_row["collecting_institution"],
            subjects=tuple(json.loads(source_row["subjects"])),
            collectors=tuple(json.loads(source_row["collectors"])))
        new_ids: list[str] = []
        with self._lock, self._conn:
            cur = self._conn.cursor()
            self._insert_group(cur, copy)
            cur.execute("INSERT INTO memberships VALUES (?,?,?,?)",
                        (actor, copy.id, "owner", _iso(now)))
            for res in self._conn.execute(
                    "SELECT * FROM resources WHERE group_id=? ORDER BY added_at, id",
                    (source,)).fetchall():
                new_ids.append(self._copy_resource_into(cur, res, copy.id, None, actor))
            self._log(cur, actor, "group_copied", "group", copy.id, copy.id,
                      {"source": source})
        for new_id in new_ids:
            self._emit_index("upsert", new_id)
        return copy

    # -- annotations and tags -------------------------------------------------

    def annotate_resource(self, resource_id: str, kind: str, value: str,
                          action: str, actor: str):
        assert kind in ("comment", "tag") and action in ("add", "remove")
        row = self._resource_row(resource_id)
        group_row = self._group_row(row["group_id"])
        if group_row["read_only"]:
            raise ReadOnlyGroup(row["group_id"])
        self._require_member(actor, row["group_id"])
        now = self.clock()

        if kind == "comment":
            if action == "remove":
                raise EmptyValue("comments cannot be removed")
            text = value.strip()
            if not text:
                raise EmptyValue("comment text must be non-empty")
            if len(text) > 10_000:
                raise EmptyValue("comment text exceeds 10,000 characters")
            annotation = Annotation(_new_id(), resource_id, actor, text, now)
            with self._lock, self._conn:
                cur = self._conn.cursor()
                cur.execute("INSERT INTO annotations VALUES (?,?,?,?,?)",
                            (annotation.id, resource_id, actor, text, _iso(now)))
                self._log(cur, actor, "comment_added", "resource", resource_id,
                          row["group_id"])
            self._emit_index("upsert", resource_id)
            return annotation

        tag = normalize_tag(value)
        if not tag:
            raise EmptyValue("tag is empty after normalization")
        if action == "add":
            with self._lock, self._conn:
                cur = self._conn.cursor()
                try:
                    cur.execute("INSERT INTO tags VALUES (?,?,?,?)",
                                (resource_id, tag, actor, _iso(now)))
                except sqlite3.IntegrityError as exc:
                    raise DuplicateTag(f"{tag} already on {resource_id}") from exc
                self._log(cur, actor, "tag_added", "resource", resource_id,
                          row["group_id"], {"tag": tag})
            self._emit_index("upsert", resource_id)
            return TagAssignment(resource_id, tag, actor, now)
        with self._lock, self._conn:
            cur = self._conn.cursor()
            result = cur.execute("DELETE FROM tags WHERE resource_id=? AND tag=?",
                                 (resource_id, tag))
            if result.rowcount == 0:
                raise EmptyValue(f"tag {tag!r} not present on {resource_id}")
            self._log(cur, actor, "tag_removed", "resource", resource_id,
                      row["group_id"], {"tag": tag})
        self._emit_index("upsert", resource_id)
        return None

    def list_tags(self, resource_id: str) -> list[TagAssignment]:
        rows = self._conn.execute(
            "SELECT * FROM tags WHERE resource_id=? ORDER BY tag", (resource_id,))
        return [TagAssignment(r["resource_id"], r["tag"], r["author"],
                              parse_iso(r["created_at"])) for r in rows]

    def list_annotations(self, resource_id: str) -> list[Annotation]:
        rows = self._conn.execute(
            "SELECT * FROM annotations WHERE resource_id=? ORDER BY rowid",
            (resource_id,))
        return [Annotation(r["id"], r["resource_id"], r["author"], r["text"],
                           parse_iso(r["created_at"])) for r in rows]

    # -- activity -------------------------------------------------------------

    def log_action(self, actor: str, action_type: str, subject_type: str,
                   subject_id: str, group_id: str | None = None,
                   details: dict[str, str] | None = None) -> int:
        """For actions completed outside the store (searches, archive-now,
        exports)."""
        with self._lock, self._conn:
            return self._log(self._conn.cursor(), actor, action_type,
                             subject_type, subject_id, group_id, details)

    def _to_activity(self, row: sqlite3.Row) -> ActivityLogEntry:
        return ActivityLogEntry(
            id=row["id"], actor=row["actor"], action_type=row["action_type"],
            subject_type=row["subject_type"], subject_id=row["subject_id"],
            timestamp=parse_iso(row["timestamp"]),
            details=json.loads(row["details"]), group_id=row["group_id"])

    def group_activity_summary(self, group: str, since: datetime | None = None,
                               limit: int = 50) -> list[ActivityLogEntry]:
        self._group_row(group)
        sql = "SELECT * FROM activity WHERE group_id=?"
        args: list = [group]
        if since is not None:
            sql += " AND timestamp>=?"
            args.append(_iso(since))
        sql += " ORDER BY id DESC LIMIT ?"
        args.append(limit)
        return [self._to_activity(r) for r in self._conn.execute(sql, args)]

    def all_activity(self) -> list[ActivityLogEntry]:
        return [self._to_activity(r)
                for r in self._conn.execute("SELECT * FROM activity ORDER BY id")]

    # -- crawl cursors --------------------------------------------------------

    def get_cursor(self, external_id: str) -> CrawlCursor | None:
        row = self._conn.execute(
            "SELECT * FROM cursors WHERE external_id=?", (external_id,)).fetchone()
        if row is None:
            return None
        return CrawlCursor(row["external_id"], parse_iso(row["last_crawled_at"]),
                           parse_iso(row["latest_capture_at"]))

    def list_cursors(self) -> list[CrawlCursor]:
        return [CrawlCursor(r["external_id"], parse_iso(r["last_crawled_at"]),
                            parse_iso(r["latest_capture_at"]))
                for r in self._conn.execute("SELECT * FROM cursors ORDER BY external_id")]

    def write_cursor(self, cursor: CrawlCursor) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO cursors VALUES (?,?,?) ON CONFLICT(external_id)"
                " DO UPDATE SET last_crawled_at=excluded.last_crawled_at,"
                " latest_capture_at=excluded.latest_capture_at",
                (cursor.external_id, _iso(cursor.last_crawled_at),
                 _iso(cursor.latest_capture_at)))

    # -- sessions (used by the service layer) ---------------------------------

    def store_session(self, token: str, user_id: str, expires_at: datetime) -> None:
        with self._lock, self._conn:
            self._conn.execute("INSERT INTO sessions VALUES (?,?,?)",
                               (token, user_id, _iso(expires_at)))

    def lookup_session(self, token: str) -> tuple[str, datetime] | None:
        row = self._conn.execute(
            "SELECT * FROM sessions WHERE token=?", (token,)).fetchone()
        if row is None:
            return None
        return row["user_id"], parse_iso(row["expires_at"])

    # -- snapshots (test support for state-equality checks) -------------------

    def state_snapshot(self) -> dict:
        """Deterministic dump of all curatorial state, for before/after
        comparisons in read-only-enforcement and idempotence tests."""
        tables = ["groups", "resources", "captures", "annotations", "tags",
                  "memberships", "cursors"]
        snapshot = {}
        for table in tables:
            rows = self._conn.execute(f"SELECT * FROM {table}").fetchall()
            snapshot[table] = sorted(tuple(r) for r in rows)
        return snapshot


def _hash_password(password: str, salt: bytes | None = None) -> tuple[bytes, bytes]:
    import hashlib
    import os

    if salt is None:
        salt = os.urandom(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, 100_000)
    return salt, digest
