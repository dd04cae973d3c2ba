from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from webarc.domain import DomainStore, ResourceData


class FakeClock:
    """Deterministic clock for stores under test."""

    def __init__(self, start: datetime | None = None):
        self.now = start or datetime(2016, 6, 1, 12, 0, 0, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        return self.now

    def advance(self, **kwargs) -> datetime:
        self.now += timedelta(**kwargs)
        return self.now


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def store(clock):
    s = DomainStore(clock=clock)
    yield s
    s.close()


@pytest.fixture
def users(store):
    return {
        "u1": store.create_user("ada", "Ada", role="curator", password="pw1"),
        "u2": store.create_user("ben", "Ben", role="member", password="pw2"),
        "admin": store.create_user("root", "Root", role="admin", password="pw3"),
    }


@pytest.fixture
def group(store, users):
    return store.create_group("Climate Justice", "seed nominations", users["u1"].id)


def make_resource(store, group_id, actor, url, **fields):
    return store.add_resource(group_id, ResourceData(original_url=url, **fields),
                              actor=actor)


@pytest.fixture
def ingested_group(store, clock):
    """A read-only mirror with one resource, built via the privileged path."""
    from webarc.domain import CaptureRecord

    group = store.create_ingested_group(
        "Human Rights Web Archive", "HRWA mirror", _system(store), "1475",
        institution="Columbia University Libraries")
    resource = store.add_resource(
        group.id,
        ResourceData(original_url="http://www.tibetinfonet.net/",
                     title="TibetInfoNet", subjects=["Human Rights"]),
        captures=[CaptureRecord("", datetime(2008, 5, 1, tzinfo=timezone.utc),
                                "https://archive.test/web/20080501000000/http://www.tibetinfonet.net/")],
        actor=_system(store), privileged=True)
    return group, resource


def _system(store):
    from webarc.ingestion import _system_user
    return _system_user(store)
