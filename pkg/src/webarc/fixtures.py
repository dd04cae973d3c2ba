"""Synthetic fixture corpora for tests, demos, and benchmarks.

The generated corpus mirrors the published shape of the real data: about
200 collections, one human-rights collection with 711 seeds (including a
seed that is gone from the live web but captured May 2008 through July
2015), and one art-site seed captured 1418 times between 2009-04-16 and
2016-03-31.
"""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .ingestion import (
    CollectionSourceRecord,
    FixtureCorpusWriter,
    SeedSourceRecord,
)
from .memento import MementoEntry, TimeMapDocument, serialize_timemap

HRWA_EXTERNAL_ID = "1475"
HRWA_TITLE = "Human Rights Web Archive"
HRWA_SEED_COUNT = 711

JODI_EXTERNAL_ID = "2950"
JODI_URL = "http://jodi.org/"
JODI_CAPTURE_COUNT = 1418
JODI_FIRST = datetime(2009, 4, 16, 10, 30, 0, tzinfo=timezone.utc)
JODI_LAST = datetime(2016, 3, 31, 8, 15, 0, tzinfo=timezone.utc)

TIBET_URL = "http://www.tibetinfonet.net/"
TIBET_FIRST = datetime(2008, 5, 1, 0, 0, 0, tzinfo=timezone.utc)
TIBET_LAST = datetime(2015, 7, 31, 0, 0, 0, tzinfo=timezone.utc)

_SUBJECT_POOL = [
    "Society & Culture", "Arts & Humanities", "Universities & Libraries",
    "Human Rights", "Politics", "Photography", "Climate", "History",
]
_INSTITUTIONS = [
    "Columbia University Libraries", "National Museum of Art",
    "State University Library", "City Heritage Foundation",
]


def jodi_memento_datetimes(count: int = JODI_CAPTURE_COUNT,
                           first: datetime = JODI_FIRST,
                           last: datetime = JODI_LAST,
                           seed: int = 7) -> list[datetime]:
    """Deterministic list of ``count`` distinct capture datetimes with the
    exact endpoints."""
    rng = random.Random(seed)
    span_s = int((last - first).total_seconds())
    interior = rng.sample(range(1, span_s), count - 2)
    stamps = [first, last] + [first + timedelta(seconds=s) for s in interior]
    stamps.sort()
    return stamps


def make_timemap(url: str, datetimes: list[datetime],
                 archive_base: str = "https://archive.test/web") -> TimeMapDocument:
    datetimes = sorted(datetimes)
    mementos = []
    for i, dt in enumerate(datetimes):
        markers = {"memento"}
        if i == 0:
            markers.add("first")
        if i == len(datetimes) - 1:
            markers.add("last")
        stamp = dt.strftime("%Y%m%d%H%M%S")
        mementos.append(MementoEntry(
            uri=f"{archive_base}/{stamp}/{url}", datetime=dt,
            rel_markers=frozenset(markers)))
    return TimeMapDocument(
        original_uri=url,
        timegate_uri=f"{archive_base.rsplit('/', 1)[0]}/timegate/{url}",
        mementos=mementos)


def jodi_timemap_bytes() -> bytes:
    return serialize_timemap(make_timemap(JODI_URL, jodi_memento_datetimes()))


def build_corpus(corpus_dir: str | Path, n_collections: int = 200,
                 hrwa_seeds: int = HRWA_SEED_COUNT, seed: int = 42) -> None:
    """Write a full synthetic corpus under ``corpus_dir``."""
    rng = random.Random(seed)
    writer = FixtureCorpusWriter(corpus_dir)

    # the human-rights analog: 711 seeds, first one gone from the live web
    hrwa = []
    hrwa.append(SeedSourceRecord(
        url=TIBET_URL, title="TibetInfoNet",
        description="Monitored the situation in Tibet; no longer live.",
        subjects=["Human Rights", "Tibet"], collector="Columbia University Libraries",
        language="en", resource_type="webpage"))
    writer.add_timemap(TIBET_URL, serialize_timemap(make_timemap(
        TIBET_URL,
        _spread_datetimes(rng, TIBET_FIRST, TIBET_LAST, 24))))
    for i in range(1, hrwa_seeds):
        url = f"http://rights-seed-{i:04d}.example.org/"
        hrwa.append(SeedSourceRecord(
            url=url, title=f"Human rights resource {i:04d}",
            description=f"Advocacy and documentation site number {i}.",
            subjects=rng.sample(_SUBJECT_POOL, 2),
            collector=rng.choice(_INSTITUTIONS),
            creator=f"Org {i % 37}", language=rng.choice(["en", "es", "fr", ""]),
            resource_type="webpage"))
        n_caps = rng.randint(1, 3)
        start = datetime(2010 + i % 6, 1 + i % 12, 1 + i % 27, tzinfo=timezone.utc)
        writer.add_timemap(url, serialize_timemap(make_timemap(
            url, _spread_datetimes(rng, start, start + timedelta(days=400), n_caps))))
    writer.add_collection(CollectionSourceRecord(
        external_id=HRWA_EXTERNAL_ID, title=HRWA_TITLE,
        institution="Columbia University Libraries",
        description="Websites of human rights organizations and individuals.",
        subjects=["Human Rights", "Society & Culture"],
        collectors=["Columbia University Libraries"],
        portal_link=f"https://portal.test/collections/{HRWA_EXTERNAL_ID}"), hrwa)

    # the daily-art analog with the dense capture history
    jodi_seed = SeedSourceRecord(
        url=JODI_URL, title="jodi.org",
        description="Net-art site whose landing page changes every day.",
        subjects=["Arts & Humanities"], collector="National Museum of Art",
        language="en", resource_type="webpage")
    writer.add_timemap(JODI_URL, jodi_timemap_bytes())
    writer.add_collection(CollectionSourceRecord(
        external_id=JODI_EXTERNAL_ID, title="Net Art Pioneers",
        institution="National Museum of Art",
        description="Early internet art preserved for study.",
        subjects=["Arts & Humanities"],
        collectors=["National Museum of Art"],
        portal_link=f"https://portal.test/collections/{JODI_EXTERNAL_ID}"),
        [jodi_seed])

    # filler collections up to n_collections
    for c in range(n_collections - 2):
        external_id = f"c{c:04d}"
        seeds = []
        for s in range(rng.randint(2, 5)):
            url = f"http://site-{c:04d}-{s}.example.net/"
            record = SeedSourceRecord(
                url=url,
                title=f"Collection {c} site {s}" if s % 3 else "",
                description=f"Topical website {s} for collection {c}.",
                subjects=rng.sample(_SUBJECT_POOL, 1) if s % 2 else [],
                collector=rng.choice(_INSTITUTIONS),
                language="" if s % 3 == 0 else "en")
            seeds.append(record)
            if not record.title:  # exercises the HTML metadata fallback
                writer.add_page(url, (
                    f'<html lang="en"><head><title>Filler site {c}-{s}</title>'
                    f'<meta name="keywords" content="archive, topic {c}">'
                    f"</head><body>hi</body></html>").encode())
            start = datetime(2012 + c % 4, 1 + c % 12, 1 + s, tzinfo=timezone.utc)
            writer.add_timemap(url, serialize_timemap(make_timemap(
                url, _spread_datetimes(rng, start, start + timedelta(days=200),
                                       rng.randint(1, 4)))))
        writer.add_collection(CollectionSourceRecord(
            external_id=external_id, title=f"Topical Collection {c:04d}",
            institution=rng.choice(_INSTITUTIONS),
            description=f"Curated sites about {_SUBJECT_POOL[c % len(_SUBJECT_POOL)]}.",
            subjects=[_SUBJECT_POOL[c % len(_SUBJECT_POOL)]],
            collectors=[rng.choice(_INSTITUTIONS)]), seeds)


def _spread_datetimes(rng: random.Random, first: datetime, last: datetime,
                      count: int) -> list[datetime]:
    if count == 1:
        return [first]
    span_s = int((last - first).total_seconds())
    interior = sorted(rng.sample(range(1, span_s), max(0, count - 2)))
    return [first] + [first + timedelta(seconds=s) for s in interior] + [last]
