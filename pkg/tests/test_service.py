from __future__ import annotations

import json
import random
from datetime import datetime, timezone

import pytest
from fastapi.testclient import TestClient

from conftest import FakeClock
from webarc.config import AppConfig
from webarc.domain import CaptureRecord, DomainStore, ResourceData
from webarc.ingestion import _system_user
from webarc.search import FixtureLiveProvider, LiveResult, SearchIndex
from webarc.service import AppContext, create_app
from webarc.transport import HttpResponse, StubTransport

UTC = timezone.utc
CDX_BASE = "https://cdx.test/cdx"
SAVE_BASE = "https://save.test"


def _cdx_body(rows):
    return json.dumps([["timestamp", "original", "statuscode"], *rows]).encode()


@pytest.fixture
def harness():
    clock = FakeClock()
    store = DomainStore(clock=clock)
    index = SearchIndex()
    index.attach(store)
    transport = StubTransport()
    provider = FixtureLiveProvider([
        LiveResult("http://live-hit.example/", "climate justice on the live web")])
    ctx = AppContext(store=store, index=index, transport=transport,
                     provider=provider,
                     config=AppConfig(cdx_base_url=CDX_BASE, save_base_url=SAVE_BASE))
    client = TestClient(create_app(ctx), raise_server_exceptions=False)
    store.create_user("ada", "Ada", role="curator", password="pw1")
    store.create_user("ben", "Ben", role="member", password="pw2")
    store.create_user("root", "Root", role="admin", password="pw3")
    yield ctx, client, clock
    store.close()


def login(client, username="ada", password="pw1"):
    resp = client.post("/api/session",
                       json={"username": username, "credential": password})
    assert resp.status_code == 200
    return {"Authorization": f"Bearer {resp.json()['token']}"}


def make_group(client, headers, title="Climate Justice"):
    resp = client.post("/api/groups", json={"title": title}, headers=headers)
    assert resp.status_code == 201
    return resp.json()


def make_resource(client, headers, group_id, url, **fields):
    resp = client.post(f"/api/groups/{group_id}/resources",
                       json={"url": url, **fields}, headers=headers)
    assert resp.status_code == 201, resp.text
    return resp.json()


def ingested_fixture(store):
    """Read-only mirror with one resource and two captures."""
    system = _system_user(store)
    group = store.create_ingested_group(
        "Human Rights Web Archive", "mirror", system, "1475")
    resource = store.add_resource(
        group.id,
        ResourceData(original_url="http://www.tibetinfonet.net/",
                     title="TibetInfoNet", subjects=["Human Rights"]),
        captures=[
            CaptureRecord("", datetime(2008, 5, 1, tzinfo=UTC),
                          "https://a.test/web/20080501000000/x"),
            CaptureRecord("", datetime(2015, 7, 31, tzinfo=UTC),
                          "https://a.test/web/20150731000000/x"),
        ],
        actor=system, privileged=True)
    return group, resource


class TestSessions:
    def test_login_and_whoami_shape(self, harness):
        _, client, _ = harness
        resp = client.post("/api/session",
                           json={"username": "ada", "credential": "pw1"})
        body = resp.json()
        assert body["username"] == "ada" and body["role"] == "curator"
        assert len(body["token"]) >= 16

    def test_wrong_password(self, harness):
        _, client, _ = harness
        resp = client.post("/api/session",
                           json={"username": "ada", "credential": "nope"})
        assert resp.status_code == 401
        assert resp.json()["code"] == "InvalidCredentials"

    def test_unknown_user_same_status(self, harness):
        _, client, _ = harness
        resp = client.post("/api/session",
                           json={"username": "ghost", "credential": "pw"})
        assert resp.status_code == 401
        assert resp.json()["code"] == "InvalidCredentials"

    def test_expired_session_rejected(self, harness):
        _, client, clock = harness
        headers = login(client)
        assert client.post("/api/groups", json={"title": "T"},
                           headers=headers).status_code == 201
        clock.advance(hours=24, seconds=1)
        resp = client.post("/api/groups", json={"title": "U"}, headers=headers)
        assert resp.status_code == 401
        assert resp.json()["code"] == "SessionExpired"

    def test_garbage_token(self, harness):
        _, client, _ = harness
        resp = client.post("/api/groups", json={"title": "T"},
                           headers={"Authorization": "Bearer junk"})
        assert resp.status_code == 401

    def test_anonymous_mutation_rejected(self, harness):
        _, client, _ = harness
        assert client.post("/api/groups", json={"title": "T"}).status_code == 401


class TestGroups:
    def test_create_and_get(self, harness):
        _, client, _ = harness
        headers = login(client)
        group = make_group(client, headers)
        resp = client.get(f"/api/groups/{group['id']}", headers=headers)
        body = resp.json()
        assert body["group"]["title"] == "Climate Justice"
        assert body["writable"] is True
        assert [m["member_role"] for m in body["members"]] == ["owner"]

    def test_private_group_hidden_from_strangers(self, harness):
        _, client, _ = harness
        group = make_group(client, login(client))
        ben = login(client, "ben", "pw2")
        assert client.get(f"/api/groups/{group['id']}",
                          headers=ben).status_code == 403
        assert client.get(f"/api/groups/{group['id']}").status_code == 403

    def test_public_group_readable_anonymously(self, harness):
        _, client, _ = harness
        headers = login(client)
        resp = client.post("/api/groups", json={"title": "Open", "public": True},
                           headers=headers)
        gid = resp.json()["id"]
        body = client.get(f"/api/groups/{gid}").json()
        assert body["group"]["public"] is True
        assert body["writable"] is False

    def test_join_and_leave(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        ben = login(client, "ben", "pw2")
        resp = client.post(f"/api/groups/{group['id']}/members", headers=ben)
        assert resp.status_code == 201
        assert resp.json()["member_role"] == "member"
        assert client.delete(f"/api/groups/{group['id']}/members/me",
                             headers=ben).status_code == 200

    def test_sole_owner_cannot_leave(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resp = client.delete(f"/api/groups/{group['id']}/members/me", headers=ada)
        assert resp.status_code == 409
        assert resp.json()["code"] == "SoleOwnerCannotLeave"

    def test_unknown_group_404(self, harness):
        _, client, _ = harness
        resp = client.get("/api/groups/nope", headers=login(client))
        assert resp.status_code == 404
        assert resp.json()["code"] == "UnknownGroup"

    def test_merge_and_copy(self, harness):
        _, client, _ = harness
        ada = login(client)
        a = make_group(client, ada, "A")
        b = make_group(client, ada, "B")
        make_resource(client, ada, a["id"], "http://one.com/", title="One")
        make_resource(client, ada, b["id"], "http://two.com/", title="Two")
        merged = client.post("/api/groups/merge",
                             json={"sources": [a["id"], b["id"]], "title": "AB"},
                             headers=ada)
        assert merged.status_code == 201
        body = client.get(f"/api/groups/{merged.json()['id']}", headers=ada).json()
        assert {r["url"] for r in body["resources"]} == \
            {"http://one.com/", "http://two.com/"}
        copied = client.post(f"/api/groups/{a['id']}/copy", headers=ada)
        assert copied.status_code == 201
        assert copied.json()["read_only"] is False

    def test_merge_requires_two_sources(self, harness):
        _, client, _ = harness
        ada = login(client)
        a = make_group(client, ada, "A")
        resp = client.post("/api/groups/merge",
                           json={"sources": [a["id"]], "title": "X"}, headers=ada)
        assert resp.status_code == 422
        assert resp.json()["code"] == "FewerThanTwoSources"

    def test_subgroup_nesting_limit(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        sub = client.post(f"/api/groups/{group['id']}/subgroups",
                          json={"title": "Sub"}, headers=ada)
        assert sub.status_code == 201
        deeper = client.post(f"/api/groups/{sub.json()['id']}/subgroups",
                             json={"title": "Deeper"}, headers=ada)
        assert deeper.status_code == 422
        assert deeper.json()["code"] == "NestingTooDeep"

    def test_group_search_listing(self, harness):
        _, client, _ = harness
        ada = login(client)
        make_group(client, ada, "Alpha Climate")
        make_group(client, ada, "Beta Art")
        names = [g["title"] for g in
                 client.get("/api/groups", params={"query": "climate"},
                            headers=ada).json()["groups"]]
        assert names == ["Alpha Climate"]


class TestResources:
    def test_add_edit_delete(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resource = make_resource(client, ada, group["id"], "http://x.com/",
                                 title="X site")
        patched = client.patch(f"/api/resources/{resource['id']}",
                               json={"changes": {"title": "Renamed"}},
                               headers=ada)
        assert patched.json()["title"] == "Renamed"
        assert client.delete(f"/api/resources/{resource['id']}",
                             headers=ada).status_code == 200
        assert client.get(f"/api/resources/{resource['id']}",
                          headers=ada).status_code == 404

    def test_url_normalized_and_duplicate_conflict(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        r = make_resource(client, ada, group["id"], "HTTP://X.com:80/a/../b")
        assert r["url"] == "http://x.com/b"
        resp = client.post(f"/api/groups/{group['id']}/resources",
                           json={"url": "http://x.com/b"}, headers=ada)
        assert resp.status_code == 409
        assert resp.json()["code"] == "DuplicateUrlInGroup"

    def test_invalid_url_422(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resp = client.post(f"/api/groups/{group['id']}/resources",
                           json={"url": "not a url"}, headers=ada)
        assert resp.status_code == 422
        assert resp.json()["code"] == "InvalidUrl"

    def test_non_member_cannot_add(self, harness):
        _, client, _ = harness
        group = make_group(client, login(client))
        ben = login(client, "ben", "pw2")
        resp = client.post(f"/api/groups/{group['id']}/resources",
                           json={"url": "http://y.com/"}, headers=ben)
        assert resp.status_code == 403
        assert resp.json()["code"] == "NotAMember"

    def test_protected_field_not_editable(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resource = make_resource(client, ada, group["id"], "http://x.com/")
        resp = client.patch(f"/api/resources/{resource['id']}",
                            json={"changes": {"url": "http://other.com/"}},
                            headers=ada)
        assert resp.status_code == 422
        assert resp.json()["code"] == "FieldNotEditable"

    def test_transfer_copy(self, harness):
        _, client, _ = harness
        ada = login(client)
        a = make_group(client, ada, "A")
        b = make_group(client, ada, "B")
        resource = make_resource(client, ada, a["id"], "http://x.com/", title="X")
        copied = client.post(f"/api/resources/{resource['id']}/transfer",
                             json={"target_group": b["id"], "mode": "copy"},
                             headers=ada)
        assert copied.status_code == 201
        assert copied.json()["group_id"] == b["id"]
        assert copied.json()["id"] != resource["id"]
        # original still present
        assert client.get(f"/api/resources/{resource['id']}",
                          headers=ada).status_code == 200

    def test_tags_and_annotations(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resource = make_resource(client, ada, group["id"], "http://x.com/")
        assert client.post(f"/api/resources/{resource['id']}/tags/%20Photo%20%20Gallery",
                           headers=ada).json()["tag"] == "photo gallery"
        dup = client.post(f"/api/resources/{resource['id']}/tags/photo%20gallery",
                          headers=ada)
        assert dup.status_code == 409 and dup.json()["code"] == "DuplicateTag"
        note = client.post(f"/api/resources/{resource['id']}/annotations",
                           json={"text": "worth keeping"}, headers=ada)
        assert note.status_code == 201
        detail = client.get(f"/api/resources/{resource['id']}", headers=ada).json()
        assert [t["tag"] for t in detail["tags"]] == ["photo gallery"]
        assert [a["text"] for a in detail["annotations"]] == ["worth keeping"]
        removed = client.delete(f"/api/resources/{resource['id']}/tags/photo%20gallery",
                                headers=ada)
        assert removed.status_code == 200

    def test_timeline_and_captures(self, harness):
        ctx, client, _ = harness
        _, resource = ingested_fixture(ctx.store)
        timeline = client.get(f"/api/resources/{resource.id}/timeline").json()
        assert timeline["span"]["count"] == 2
        assert timeline["span"]["first"].startswith("2008-05-01")
        assert timeline["span"]["last"].startswith("2015-07-31")
        assert {b["month"]: b["count"] for b in timeline["buckets"]} == \
            {"2008-05": 1, "2015-07": 1}
        captures = client.get(f"/api/resources/{resource.id}/captures").json()
        assert len(captures["captures"]) == 2


class TestReadOnlyEnforcement:
    MUTATIONS = [
        ("POST", "/api/groups/{gid}/resources", {"url": "http://new.com/"}),
        ("POST", "/api/groups/{gid}/subgroups", {"title": "S"}),
        ("PATCH", "/api/resources/{rid}", {"changes": {"title": "X"}}),
        ("DELETE", "/api/resources/{rid}", None),
        ("POST", "/api/resources/{rid}/annotations", {"text": "hi"}),
        ("POST", "/api/resources/{rid}/tags/newtag", None),
        ("DELETE", "/api/resources/{rid}/tags/newtag", None),
    ]

    @pytest.mark.parametrize("username,password",
                             [("ada", "pw1"), ("ben", "pw2"), ("root", "pw3")])
    def test_uniform_403_for_every_role(self, harness, username, password):
        ctx, client, _ = harness
        group, resource = ingested_fixture(ctx.store)
        headers = login(client, username, password)
        before = ctx.store.state_snapshot()
        for method, template, body in self.MUTATIONS:
            url = template.format(gid=group.id, rid=resource.id)
            resp = client.request(method, url, json=body, headers=headers)
            assert resp.status_code == 403, (method, url, resp.text)
            assert resp.json()["code"] == "ReadOnlyGroup"
        assert ctx.store.state_snapshot() == before

    def test_transfer_into_readonly_denied(self, harness):
        ctx, client, _ = harness
        group, _ = ingested_fixture(ctx.store)
        ada = login(client)
        own = make_group(client, ada)
        resource = make_resource(client, ada, own["id"], "http://mine.com/")
        resp = client.post(f"/api/resources/{resource['id']}/transfer",
                           json={"target_group": group.id, "mode": "copy"},
                           headers=ada)
        assert resp.status_code == 403
        assert resp.json()["code"] == "ReadOnlyGroup"

    def test_copy_then_edit_path_works(self, harness):
        ctx, client, _ = harness
        group, _ = ingested_fixture(ctx.store)
        ada = login(client)
        copied = client.post(f"/api/groups/{group.id}/copy", headers=ada).json()
        assert copied["read_only"] is False
        body = client.get(f"/api/groups/{copied['id']}", headers=ada).json()
        rid = body["resources"][0]["id"]
        resp = client.patch(f"/api/resources/{rid}",
                            json={"changes": {"title": "My copy"}}, headers=ada)
        assert resp.status_code == 200


class TestActivity:
    def test_feed_newest_first(self, harness):
        _, client, clock = harness
        ada = login(client)
        group = make_group(client, ada)
        for i in range(3):
            clock.advance(minutes=1)
            make_resource(client, ada, group["id"], f"http://r{i}.com/")
        feed = client.get(f"/api/groups/{group['id']}/activity",
                          headers=ada).json()["entries"]
        kinds = [e["action_type"] for e in feed]
        assert kinds[:3] == ["resource_added"] * 3
        assert kinds[-1] == "group_created"
        ids = [e["id"] for e in feed]
        assert ids == sorted(ids, reverse=True)

    def test_limit_parameter(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        for i in range(5):
            make_resource(client, ada, group["id"], f"http://r{i}.com/")
        feed = client.get(f"/api/groups/{group['id']}/activity",
                          params={"limit": 2}, headers=ada).json()["entries"]
        assert len(feed) == 2


class TestSearchEndpoint:
    def _seed(self, client, ada):
        group = make_group(client, ada, "Climate Hub")
        make_resource(client, ada, group["id"], "http://a.com/",
                      title="climate justice report", language="en")
        make_resource(client, ada, group["id"], "http://b.com/",
                      title="unrelated art page", language="es")
        return group

    def test_results_and_facets(self, harness):
        _, client, _ = harness
        ada = login(client)
        self._seed(client, ada)
        body = client.get("/api/search", params={"q": "climate"},
                          headers=ada).json()
        archive = [r for r in body["results"] if r["kind"] == "archive"]
        assert len(archive) == 1 and archive[0]["url"] == "http://a.com/"
        assert body["facet_counts"]["language"] == {"en": 1}
        # live block strictly after archive block
        kinds = [r["kind"] for r in body["results"]]
        assert kinds == sorted(kinds, key=lambda k: k != "archive")

    def test_filter_param(self, harness):
        _, client, _ = harness
        ada = login(client)
        self._seed(client, ada)
        body = client.get("/api/search",
                          params={"q": "climate", "language": "es"},
                          headers=ada).json()
        assert [r for r in body["results"] if r["kind"] == "archive"] == []

    def test_one_usage_record_per_search(self, harness):
        ctx, client, _ = harness
        ada = login(client)
        self._seed(client, ada)
        before = [e for e in ctx.store.all_activity()
                  if e.action_type == "search_executed"]
        client.get("/api/search", params={"q": "climate", "language": "en"},
                   headers=ada)
        after = [e for e in ctx.store.all_activity()
                 if e.action_type == "search_executed"]
        assert len(after) == len(before) + 1
        record = after[-1]
        assert record.details["query"] == "climate"
        assert record.details["filters"] == "language=en"
        assert record.details["result_count"].isdigit()

    def test_anonymous_search_logged(self, harness):
        ctx, client, _ = harness
        client.get("/api/search", params={"q": "anything"})
        (record,) = [e for e in ctx.store.all_activity()
                     if e.action_type == "search_executed"]
        assert record.actor == "anonymous"

    def test_provider_down_degrades(self, harness):
        ctx, client, _ = harness
        ada = login(client)
        self._seed(client, ada)
        ctx.provider.enabled = False
        body = client.get("/api/search", params={"q": "climate"},
                          headers=ada).json()
        assert body["provider_warning"] is True
        assert all(r["kind"] == "archive" for r in body["results"])

    def test_page_size_cap(self, harness):
        _, client, _ = harness
        resp = client.get("/api/search", params={"q": "x", "page_size": 101})
        assert resp.status_code == 422


class TestUrlStatusAndArchiveNow:
    URL = "http://www.tibetinfonet.net/"

    def _stub_indexed(self, transport):
        from webarc.memento import cdx_query_url
        transport.add(cdx_query_url(CDX_BASE, self.URL, 1), HttpResponse(
            200, _cdx_body([["20080501000000", self.URL, "200"]])))
        transport.add(cdx_query_url(CDX_BASE, self.URL, -1), HttpResponse(
            200, _cdx_body([["20080501000000", self.URL, "200"],
                            ["20150731000000", self.URL, "200"]])))

    def test_indexed(self, harness):
        ctx, client, _ = harness
        self._stub_indexed(ctx.transport)
        body = client.get("/api/url-status", params={"url": self.URL}).json()
        assert body["status"] == "indexed"
        assert body["first_capture"].startswith("2008-05-01")
        assert body["last_capture"].startswith("2015-07-31")

    def test_never_indexed(self, harness):
        ctx, client, _ = harness
        from webarc.memento import cdx_query_url
        ctx.transport.add(cdx_query_url(CDX_BASE, "http://fresh.com/", 1),
                          HttpResponse(200, _cdx_body([])))
        body = client.get("/api/url-status",
                          params={"url": "http://fresh.com/"}).json()
        assert body["status"] == "never_indexed"
        assert body["first_capture"] is None

    def test_lookup_failure_502(self, harness):
        ctx, client, _ = harness
        from webarc.errors import TransportError
        from webarc.memento import cdx_query_url
        ctx.transport.add(cdx_query_url(CDX_BASE, "http://down.com/", 1),
                          TransportError("boom"))
        resp = client.get("/api/url-status", params={"url": "http://down.com/"})
        assert resp.status_code == 502
        assert resp.json()["code"] == "TransportError"

    def test_archive_now_accepted_adds_capture(self, harness):
        ctx, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resource = make_resource(client, ada, group["id"], "http://mine.com/")
        ctx.transport.add(f"{SAVE_BASE}/save/http://mine.com/", HttpResponse(
            200, headers={"Content-Location": "/web/20160601120000/http://mine.com/"}))
        resp = client.post(f"/api/resources/{resource['id']}/archive-now",
                           headers=ada)
        assert resp.status_code == 202
        assert resp.json()["outcome"] == "accepted"
        captures = client.get(f"/api/resources/{resource['id']}/captures",
                              headers=ada).json()["captures"]
        assert [c["provenance"] for c in captures] == ["on_demand_archive"]
        log = [e for e in ctx.store.all_activity()
               if e.action_type == "archive_now_requested"]
        assert len(log) == 1 and log[0].details["outcome"] == "accepted"

    def test_archive_now_rate_limited(self, harness):
        ctx, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resource = make_resource(client, ada, group["id"], "http://busy.com/")
        ctx.transport.add(f"{SAVE_BASE}/save/http://busy.com/", HttpResponse(429))
        resp = client.post(f"/api/resources/{resource['id']}/archive-now",
                           headers=ada)
        assert resp.status_code == 202
        assert resp.json()["outcome"] == "rate_limited"
        captures = client.get(f"/api/resources/{resource['id']}/captures",
                              headers=ada).json()["captures"]
        assert captures == []


class TestIndexStaysInSync:
    def test_api_mutations_reflected_in_search(self, harness):
        _, client, _ = harness
        ada = login(client)
        group = make_group(client, ada)
        resource = make_resource(client, ada, group["id"], "http://x.com/",
                                 title="glacier melt study")
        hits = client.get("/api/search", params={"q": "glacier"},
                          headers=ada).json()["results"]
        assert any(r["resource_id"] == resource["id"] for r in hits)
        client.delete(f"/api/resources/{resource['id']}", headers=ada)
        hits = client.get("/api/search", params={"q": "glacier"},
                          headers=ada).json()["results"]
        assert all(r["resource_id"] != resource["id"] for r in hits)
