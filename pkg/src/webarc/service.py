"""HTTP boundary: sessions, authorization, request dispatch, and usage
logging of searches.

Handlers are stateless; consistency comes from the domain store's
transactions and the single search-index writer. Every mutation passes
through :func:`authorize` before any domain call, and every served search
emits exactly one usage-log record.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Any

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import memento
from .config import AppConfig
from .domain import (
    ActivityLogEntry,
    CaptureRecord,
    DomainStore,
    Group,
    Membership,
    Resource,
    ResourceData,
    parse_iso,
)
from .errors import (
    AlreadyMember,
    DuplicateTag,
    DuplicateUrlInGroup,
    EmptyTitle,
    EmptyValue,
    FewerThanTwoSources,
    FieldNotEditable,
    InvalidCredentials,
    InvalidFacetField,
    InvalidUrl,
    NestingTooDeep,
    NotAMember,
    ParseError,
    ReadOnlyGroup,
    SessionExpired,
    SoleOwnerCannotLeave,
    TransportError,
    UnknownCollection,
    UnknownGroup,
    UnknownResource,
    UnknownUser,
    WebarcError,
)
from .search import FACET_FIELDS, QuerySpec, SearchIndex, SearchPage, federated_search
from .transport import Transport

SESSION_TTL = timedelta(hours=24)
MAX_PAGE_SIZE = 100

_STATUS_BY_ERROR: dict[type, int] = {
    InvalidCredentials: 401,
    SessionExpired: 401,
    ReadOnlyGroup: 403,
    NotAMember: 403,
    UnknownUser: 404,
    UnknownGroup: 404,
    UnknownResource: 404,
    UnknownCollection: 404,
    DuplicateUrlInGroup: 409,
    DuplicateTag: 409,
    AlreadyMember: 409,
    SoleOwnerCannotLeave: 409,
    EmptyTitle: 422,
    EmptyValue: 422,
    InvalidUrl: 422,
    FieldNotEditable: 422,
    FewerThanTwoSources: 422,
    NestingTooDeep: 422,
    InvalidFacetField: 422,
    ParseError: 502,
    TransportError: 502,
}


def error_status(exc: WebarcError) -> int:
    for klass in type(exc).__mro__:
        if klass in _STATUS_BY_ERROR:
            return _STATUS_BY_ERROR[klass]
    return 500


@dataclass
class AppContext:
    store: DomainStore
    index: SearchIndex
    transport: Transport
    provider: Any = None  # LiveWebProvider | None
    config: AppConfig = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.config is None:
            self.config = AppConfig()


# -- serialization ------------------------------------------------------------

def _iso(dt: datetime | None) -> str | None:
    return dt.astimezone(timezone.utc).isoformat() if dt else None


def group_json(g: Group) -> dict:
    return {
        "id": g.id, "title": g.title, "description": g.description,
        "origin": g.origin, "read_only": g.read_only,
        "parent_group": g.parent_group, "created_by": g.created_by,
        "created_at": _iso(g.created_at),
        "source_external_id": g.source_external_id,
        "source_portal_link": g.source_portal_link,
        "collecting_institution": g.collecting_institution,
        "subjects": list(g.subjects), "collectors": list(g.collectors),
        "public": g.public,
    }


def resource_json(r: Resource) -> dict:
    return {
        "id": r.id, "group_id": r.group_id, "subgroup_id": r.subgroup_id,
        "url": r.url, "original_url": r.original_url, "title": r.title,
        "description": r.description, "subjects": list(r.subjects),
        "collector": r.collector, "creator": r.creator, "publisher": r.publisher,
        "language": r.language, "format": r.format,
        "resource_type": r.resource_type, "media_type": r.media_type,
        "source": r.source, "added_by": r.added_by, "added_at": _iso(r.added_at),
        "thumbnail_ref": r.thumbnail_ref, "availability": r.availability,
    }


def capture_json(c: CaptureRecord) -> dict:
    return {"capture_datetime": _iso(c.capture_datetime),
            "capture_uri": c.capture_uri, "provenance": c.provenance}


def membership_json(m: Membership) -> dict:
    return {"user": m.user, "group": m.group, "member_role": m.member_role,
            "joined_at": _iso(m.joined_at)}


def activity_json(entry: ActivityLogEntry) -> dict:
    return {"id": entry.id, "actor": entry.actor,
            "action_type": entry.action_type, "subject_type": entry.subject_type,
            "subject_id": entry.subject_id, "group_id": entry.group_id,
            "timestamp": _iso(entry.timestamp), "details": entry.details}


def search_page_json(page: SearchPage) -> dict:
    return {
        "total": page.total, "page": page.page, "page_size": page.page_size,
        "provider_warning": page.provider_warning,
        "facet_counts": page.facet_counts,
        "results": [{
            "kind": e.kind, "url": e.url, "title": e.title,
            "snippet": e.snippet, "snippet_offsets": e.snippet_offsets,
            "score": e.score, "score_components": e.score_components,
            "source_label": e.source_label, "resource_id": e.resource_id,
            "group_id": e.group_id, "matched_terms": e.matched_terms,
            "capture_first": _iso(e.capture_first),
            "capture_last": _iso(e.capture_last),
            "capture_count": e.capture_count,
        } for e in page.results],
    }


# -- request bodies -----------------------------------------------------------

class SessionBody(BaseModel):
    username: str
    credential: str


class GroupBody(BaseModel):
    title: str
    description: str = ""
    public: bool = False


class SubgroupBody(BaseModel):
    title: str


class MergeBody(BaseModel):
    sources: list[str]
    title: str


class ResourceBody(BaseModel):
    url: str
    title: str = ""
    description: str = ""
    subjects: list[str] = Field(default_factory=list)
    collector: str = ""
    creator: str = ""
    publisher: str = ""
    language: str = ""
    format: str = ""
    resource_type: str = ""
    media_type: str = "webpage"
    source: str = "live_web"
    subgroup_id: str | None = None


class ResourcePatch(BaseModel):
    changes: dict[str, Any]


class TransferBody(BaseModel):
    target_group: str
    mode: str  # copy | move


class AnnotationBody(BaseModel):
    text: str


# -- authorization ------------------------------------------------------------

MUTATING_ACTIONS = {
    "add_resource", "edit_resource", "remove_resource", "annotate",
    "create_subgroup", "transfer_target", "transfer_source",
}


def authorize(store: DomainStore, user_id: str, action: str, group_id: str) -> None:
    """Gate every mutation: read-only groups deny all roles (admins
    included; copy-then-edit is the sanctioned path), non-members are
    denied membership-scoped actions."""
    group = store.get_group(group_id)
    if action in MUTATING_ACTIONS:
        if group.read_only:
            raise ReadOnlyGroup(group_id)
        top = group.parent_group or group.id
        if not any(m.group == top for m in store.list_memberships(user=user_id)):
            raise NotAMember(f"user {user_id} is not a member of group {top}")


def can_read(store: DomainStore, user_id: str | None, group: Group) -> bool:
    if group.public or group.origin == "ingested":
        return True
    if user_id is None:
        return False
    top = group.parent_group or group.id
    return any(m.group == top for m in store.list_memberships(user=user_id))


# -- app factory --------------------------------------------------------------

def create_app(ctx: AppContext) -> FastAPI:
    app = FastAPI(title="webarc", version="0.1.0")
    store = ctx.store

    @app.exception_handler(WebarcError)
    async def handle_domain_error(_request: Request, exc: WebarcError):
        return JSONResponse(
            status_code=error_status(exc),
            content={"code": exc.code, "message": str(exc) or exc.code})

    def current_user(authorization: str | None = Header(default=None)) -> str | None:
        if not authorization or not authorization.startswith("Bearer "):
            return None
        token = authorization.removeprefix("Bearer ").strip()
        found = store.lookup_session(token)
        if found is None:
            raise SessionExpired("unknown session token")
        user_id, expires_at = found
        if expires_at < store.clock():
            raise SessionExpired("session expired")
        return user_id

    def require_user(user_id: str | None = Depends(current_user)) -> str:
        if user_id is None:
            raise SessionExpired("authentication required")
        return user_id

    # -- sessions -------------------------------------------------------------

    @app.post("/api/session")
    def open_session(body: SessionBody):
        user = store.verify_credentials(body.username, body.credential)
        if user is None:
            raise InvalidCredentials("invalid username or password")
        token = secrets.token_urlsafe(16)  # 128 bits
        expires_at = store.clock() + SESSION_TTL
        store.store_session(token, user.id, expires_at)
        return {"token": token, "user_id": user.id, "username": user.username,
                "role": user.role, "expires_at": _iso(expires_at)}

    # -- groups ---------------------------------------------------------------

    @app.get("/api/groups")
    def list_groups(query: str = "", user_id: str | None = Depends(current_user)):
        groups = [g for g in store.find_groups(query) if can_read(store, user_id, g)]
        return {"groups": [group_json(g) for g in groups]}

    @app.post("/api/groups", status_code=201)
    def create_group(body: GroupBody, user_id: str = Depends(require_user)):
        group = store.create_group(body.title, body.description, user_id,
                                   public=body.public)
        return group_json(group)

    @app.get("/api/groups/{group_id}")
    def get_group(group_id: str, user_id: str | None = Depends(current_user)):
        group = store.get_group(group_id)
        if not can_read(store, user_id, group):
            raise NotAMember(f"group {group_id} is not readable")
        resources = store.list_resources(group.parent_group or group.id) \
            if group.parent_group else store.list_resources(group.id)
        if group.parent_group:
            resources = [r for r in resources if r.subgroup_id == group.id]
        writable = user_id is not None and not group.read_only and any(
            m.group == (group.parent_group or group.id)
            for m in store.list_memberships(user=user_id))
        return {
            "group": group_json(group),
            "subgroups": [group_json(s) for s in store.list_subgroups(group.id)],
            "resources": [resource_json(r) for r in resources],
            "members": [membership_json(m)
                        for m in store.list_memberships(group=group.parent_group or group.id)],
            "writable": writable,
        }

    @app.post("/api/groups/{group_id}/members", status_code=201)
    def join_group(group_id: str, user_id: str = Depends(require_user)):
        membership = store.set_membership(user_id, group_id, "join")
        return membership_json(membership)

    @app.delete("/api/groups/{group_id}/members/me")
    def leave_group(group_id: str, user_id: str = Depends(require_user)):
        store.set_membership(user_id, group_id, "leave")
        return {"left": group_id}

    @app.post("/api/groups/{group_id}/resources", status_code=201)
    def add_resource(group_id: str, body: ResourceBody,
                     user_id: str = Depends(require_user)):
        target = body.subgroup_id or group_id
        authorize(store, user_id, "add_resource", target)
        data = ResourceData(
            original_url=body.url, title=body.title, description=body.description,
            subjects=body.subjects, collector=body.collector, creator=body.creator,
            publisher=body.publisher, language=body.language, format=body.format,
            resource_type=body.resource_type, media_type=body.media_type,
            source=body.source)
        resource = store.add_resource(target, data, actor=user_id)
        return resource_json(resource)

    @app.post("/api/groups/{group_id}/subgroups", status_code=201)
    def create_subgroup(group_id: str, body: SubgroupBody,
                        user_id: str = Depends(require_user)):
        authorize(store, user_id, "create_subgroup", group_id)
        return group_json(store.create_subgroup(group_id, body.title, user_id))

    @app.post("/api/groups/merge", status_code=201)
    def merge_groups(body: MergeBody, user_id: str = Depends(require_user)):
        for source in body.sources:
            group = store.get_group(source)
            if not can_read(store, user_id, group):
                raise NotAMember(f"group {source} is not readable")
        return group_json(store.merge_groups(body.sources, body.title, user_id))

    @app.post("/api/groups/{group_id}/copy", status_code=201)
    def copy_group(group_id: str, user_id: str = Depends(require_user)):
        group = store.get_group(group_id)
        if not can_read(store, user_id, group):
            raise NotAMember(f"group {group_id} is not readable")
        return group_json(store.copy_group(group_id, user_id))

    @app.get("/api/groups/{group_id}/activity")
    def group_activity(group_id: str, since: str | None = None, limit: int = 50,
                       user_id: str | None = Depends(current_user)):
        group = store.get_group(group_id)
        if not can_read(store, user_id, group):
            raise NotAMember(f"group {group_id} is not readable")
        entries = store.group_activity_summary(
            group_id, since=parse_iso(since) if since else None, limit=limit)
        return {"entries": [activity_json(e) for e in entries]}

    # -- resources ------------------------------------------------------------

    @app.patch("/api/resources/{resource_id}")
    def edit_resource(resource_id: str, body: ResourcePatch,
                      user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "edit_resource", resource.group_id)
        return resource_json(
            store.edit_resource_metadata(resource_id, body.changes, user_id))

    @app.delete("/api/resources/{resource_id}")
    def delete_resource(resource_id: str, user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "remove_resource", resource.group_id)
        store.remove_resource(resource_id, user_id)
        return {"deleted": resource_id}

    @app.post("/api/resources/{resource_id}/transfer", status_code=201)
    def transfer_resource(resource_id: str, body: TransferBody,
                          user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "transfer_target", body.target_group)
        if body.mode == "move":
            authorize(store, user_id, "transfer_source", resource.group_id)
        return resource_json(
            store.transfer_resource(resource_id, body.target_group, body.mode, user_id))

    @app.post("/api/resources/{resource_id}/annotations", status_code=201)
    def add_annotation(resource_id: str, body: AnnotationBody,
                       user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "annotate", resource.group_id)
        annotation = store.annotate_resource(resource_id, "comment", body.text,
                                             "add", user_id)
        return {"id": annotation.id, "resource_id": resource_id,
                "author": annotation.author, "text": annotation.text,
                "created_at": _iso(annotation.created_at)}

    @app.get("/api/resources/{resource_id}")
    def get_resource(resource_id: str, user_id: str | None = Depends(current_user)):
        resource = store.get_resource(resource_id)
        group = store.get_group(resource.group_id)
        if not can_read(store, user_id, group):
            raise NotAMember(f"group {resource.group_id} is not readable")
        return {
            "resource": resource_json(resource),
            "group": group_json(group),
            "tags": [{"tag": t.tag, "author": t.author,
                      "created_at": _iso(t.created_at)}
                     for t in store.list_tags(resource_id)],
            "annotations": [{"id": a.id, "author": a.author, "text": a.text,
                             "created_at": _iso(a.created_at)}
                            for a in store.list_annotations(resource_id)],
        }

    @app.post("/api/resources/{resource_id}/tags/{tag}", status_code=201)
    def add_tag(resource_id: str, tag: str, user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "annotate", resource.group_id)
        assignment = store.annotate_resource(resource_id, "tag", tag, "add", user_id)
        return {"resource_id": resource_id, "tag": assignment.tag}

    @app.delete("/api/resources/{resource_id}/tags/{tag}")
    def remove_tag(resource_id: str, tag: str, user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "annotate", resource.group_id)
        store.annotate_resource(resource_id, "tag", tag, "remove", user_id)
        return {"resource_id": resource_id, "removed": tag}

    @app.get("/api/resources/{resource_id}/timeline")
    def resource_timeline(resource_id: str,
                          user_id: str | None = Depends(current_user)):
        resource = store.get_resource(resource_id)
        if not can_read(store, user_id, store.get_group(resource.group_id)):
            raise NotAMember(f"group {resource.group_id} is not readable")
        captures = store.list_captures(resource_id)
        first, last, count = memento.capture_span(captures)
        return {
            "resource_id": resource_id,
            "buckets": [{"month": b.month, "count": b.count}
                        for b in memento.aggregate_captures_by_month(captures)],
            "span": {"first": _iso(first), "last": _iso(last), "count": count},
        }

    @app.get("/api/resources/{resource_id}/captures")
    def resource_captures(resource_id: str,
                          user_id: str | None = Depends(current_user)):
        resource = store.get_resource(resource_id)
        if not can_read(store, user_id, store.get_group(resource.group_id)):
            raise NotAMember(f"group {resource.group_id} is not readable")
        return {"resource_id": resource_id,
                "captures": [capture_json(c) for c in store.list_captures(resource_id)]}

    @app.post("/api/resources/{resource_id}/archive-now", status_code=202)
    def archive_now(resource_id: str, user_id: str = Depends(require_user)):
        resource = store.get_resource(resource_id)
        authorize(store, user_id, "annotate", resource.group_id)
        receipt = memento.request_archive_now(
            resource.url, ctx.transport, ctx.config.save_base_url,
            now=store.clock())
        if receipt.outcome == "accepted" and receipt.capture_uri:
            store.add_captures(
                resource_id,
                [CaptureRecord(resource_id, receipt.at, receipt.capture_uri,
                               "on_demand_archive")],
                privileged=True)
        store.log_action(user_id, "archive_now_requested", "resource", resource_id,
                         resource.group_id, {"outcome": receipt.outcome})
        return {"requested_url": receipt.requested_url,
                "request_uri": receipt.request_uri, "outcome": receipt.outcome,
                "capture_uri": receipt.capture_uri, "at": _iso(receipt.at)}

    # -- search ---------------------------------------------------------------

    @app.get("/api/search")
    def search(q: str = "", type: str | None = None, group: str | None = None,
               collector: str | None = None, tag: str | None = None,
               language: str | None = None, source: str | None = None,
               creator: str | None = None,
               page: int = Query(default=1, ge=1),
               page_size: int = Query(default=20, ge=1, le=MAX_PAGE_SIZE),
               user_id: str | None = Depends(current_user)):
        filters = {}
        for facet_field, value in (("group", group), ("collector", collector),
                                   ("tag", tag), ("language", language),
                                   ("source_service", source), ("creator", creator)):
            if value:
                filters[facet_field] = value
        spec = QuerySpec(terms=q, media_type=type, filters=filters,
                         page=page, page_size=page_size)
        result = federated_search(spec, ctx.index, ctx.provider)
        store.log_action(
            user_id or "anonymous", "search_executed", "query", q, None,
            {"query": q, "media_type": type or "webpage",
             "filters": ",".join(f"{k}={v}" for k, v in sorted(filters.items())),
             "result_count": str(result.total)})
        return search_page_json(result)

    @app.get("/api/url-status")
    def url_status(url: str):
        status = memento.archive_status(url, ctx.transport, ctx.config.cdx_base_url)
        return {"url": url, "status": status.status,
                "first_capture": _iso(status.first_capture),
                "last_capture": _iso(status.last_capture)}

    return app
