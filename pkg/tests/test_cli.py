from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from webarc.cli import corpus_from_export, export_group, main
from webarc.config import load_config
from webarc.domain import DomainStore
from webarc.fixtures import (
    HRWA_EXTERNAL_ID,
    JODI_CAPTURE_COUNT,
    JODI_EXTERNAL_ID,
    build_corpus,
)
from webarc.ingestion import FixtureSourceAdapter, ingest_collection
from webarc.search import QuerySpec, SearchIndex


@pytest.fixture
def env(tmp_path):
    corpus = tmp_path / "corpus"
    build_corpus(corpus, n_collections=3, hrwa_seeds=6)
    config_path = tmp_path / "app.conf"
    config_path.write_text(
        f"storage_path = {tmp_path / 'store'}\n"
        f"index_path = {tmp_path / 'index'}\n"
        "fetch_parallelism = 2\n")
    return tmp_path, corpus, config_path


def run(args, **kwargs):
    return CliRunner().invoke(main, args, **kwargs)


class TestConfig:
    def test_defaults(self):
        config = load_config(None)
        assert config.update_window_days == 90
        assert config.politeness_delay_ms == 500

    def test_parse_file(self, tmp_path):
        path = tmp_path / "c.conf"
        path.write_text("# comment\nstorage_path = /x\nupdate_window_days = 30\n")
        config = load_config(path)
        assert config.storage_path == "/x"
        assert config.update_window_days == 30

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.conf"
        path.write_text("wombat = 1\n")
        with pytest.raises(ValueError):
            load_config(path)


class TestIngestCommand:
    def test_ingest_all(self, env):
        tmp_path, corpus, config_path = env
        result = run(["--config", str(config_path), "ingest",
                      "--source", str(corpus)])
        assert result.exit_code == 0, result.output
        store = DomainStore(str(tmp_path / "store"))
        try:
            groups = [g for g in store.list_groups() if g.origin == "ingested"]
            assert len(groups) == 3
        finally:
            store.close()

    def test_collection_filter(self, env):
        tmp_path, corpus, config_path = env
        result = run(["--config", str(config_path), "ingest",
                      "--source", str(corpus),
                      "--collection", JODI_EXTERNAL_ID])
        assert result.exit_code == 0
        assert f"{JODI_EXTERNAL_ID}: +1 resources, +{JODI_CAPTURE_COUNT} captures" \
            in result.output
        store = DomainStore(str(tmp_path / "store"))
        try:
            assert len([g for g in store.list_groups()
                        if g.origin == "ingested"]) == 1
        finally:
            store.close()

    def test_missing_corpus_exit_2(self, env):
        tmp_path, _, config_path = env
        result = run(["--config", str(config_path), "ingest",
                      "--source", str(tmp_path / "nope")])
        assert result.exit_code == 2

    def test_unknown_collection_id_exit_2(self, env):
        _, corpus, config_path = env
        result = run(["--config", str(config_path), "ingest",
                      "--source", str(corpus), "--collection", "zzz"])
        assert result.exit_code == 2


class TestUpdateCommand:
    def test_update_noop_after_fresh_ingest(self, env):
        _, corpus, config_path = env
        assert run(["--config", str(config_path), "ingest",
                    "--source", str(corpus)]).exit_code == 0
        result = run(["--config", str(config_path), "update",
                      "--source", str(corpus)])
        assert result.exit_code == 0
        # fixture captures are all years in the past, so nothing is selected
        assert "0 collections selected" in result.output

    def test_window_days_widens_selection(self, env):
        _, corpus, config_path = env
        assert run(["--config", str(config_path), "ingest",
                    "--source", str(corpus)]).exit_code == 0
        result = run(["--config", str(config_path), "update",
                      "--source", str(corpus), "--window-days", "100000"])
        assert result.exit_code == 0
        assert "3 collections selected" in result.output

    def test_missing_corpus_exit_2(self, env):
        tmp_path, _, config_path = env
        result = run(["--config", str(config_path), "update",
                      "--source", str(tmp_path / "nope")])
        assert result.exit_code == 2


class TestReindexCommand:
    def test_doc_count_matches_resources(self, env):
        tmp_path, corpus, config_path = env
        assert run(["--config", str(config_path), "ingest",
                    "--source", str(corpus)]).exit_code == 0
        result = run(["--config", str(config_path), "reindex"])
        assert result.exit_code == 0
        store = DomainStore(str(tmp_path / "store"))
        try:
            total = sum(len(store.list_resources(g.id))
                        for g in store.list_groups())
        finally:
            store.close()
        assert f"indexed {total} documents" in result.output
        index = SearchIndex.load(str(tmp_path / "index"))
        assert len(index.docs) == total
        assert index.ranked(QuerySpec(terms="jodi"))

    def test_reindex_empty_store(self, env):
        tmp_path, _, config_path = env
        result = run(["--config", str(config_path), "reindex"])
        assert result.exit_code == 0
        assert "indexed 0 documents" in result.output


class TestExportCommand:
    def _ingest(self, config_path, corpus):
        assert run(["--config", str(config_path), "ingest",
                    "--source", str(corpus)]).exit_code == 0

    def _hrwa_group_id(self, tmp_path):
        store = DomainStore(str(tmp_path / "store"))
        try:
            (group,) = [g for g in store.list_groups()
                        if g.source_external_id == HRWA_EXTERNAL_ID]
            return group.id
        finally:
            store.close()

    def test_jsonl_export(self, env):
        tmp_path, corpus, config_path = env
        self._ingest(config_path, corpus)
        group_id = self._hrwa_group_id(tmp_path)
        out = tmp_path / "out" / "hrwa.jsonl"
        result = run(["--config", str(config_path), "export",
                      "--group", group_id, "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 6
        urls = {r["url"] for r in lines}
        assert "http://www.tibetinfonet.net/" in urls
        manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
        assert manifest["resource_count"] == 6
        assert manifest["format"] == "jsonl"
        assert manifest["capture_count"] == sum(len(r["captures"]) for r in lines)

    def test_csv_export(self, env):
        tmp_path, corpus, config_path = env
        self._ingest(config_path, corpus)
        group_id = self._hrwa_group_id(tmp_path)
        out = tmp_path / "hrwa.csv"
        result = run(["--config", str(config_path), "export",
                      "--group", group_id, "--format", "csv",
                      "--out", str(out)])
        assert result.exit_code == 0
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 6
        tibet = [r for r in rows if r["url"] == "http://www.tibetinfonet.net/"][0]
        assert tibet["capture_count"] == "24"
        assert tibet["first_capture"].startswith("2008-05-01")
        assert tibet["last_capture"].startswith("2015-07-31")

    def test_csv_and_jsonl_agree_on_urls(self, env):
        tmp_path, corpus, config_path = env
        self._ingest(config_path, corpus)
        group_id = self._hrwa_group_id(tmp_path)
        j, c = tmp_path / "a.jsonl", tmp_path / "a.csv"
        run(["--config", str(config_path), "export", "--group", group_id,
             "--out", str(j)])
        run(["--config", str(config_path), "export", "--group", group_id,
             "--format", "csv", "--out", str(c)])
        jsonl_urls = {json.loads(l)["url"] for l in j.read_text().splitlines()}
        with open(c, newline="") as handle:
            csv_urls = {r["url"] for r in csv.DictReader(handle)}
        assert jsonl_urls == csv_urls

    def test_unknown_group_exit_3(self, env):
        _, _, config_path = env
        result = run(["--config", str(config_path), "export",
                      "--group", "nope", "--out", "/tmp/x.jsonl"])
        assert result.exit_code == 3

    def test_export_logs_usage(self, env, tmp_path):
        store = DomainStore(str(tmp_path / "s2"))
        try:
            user = store.create_user("op", "Op", role="curator")
            group = store.create_group("G", "", user.id)
            export_group(store, group.id, "jsonl", tmp_path / "g.jsonl")
            log = [e for e in store.all_activity()
                   if e.action_type == "export_performed"]
            assert len(log) == 1 and log[0].actor == "cli-operator"
        finally:
            store.close()


class TestExportRoundTrip:
    def test_jsonl_reingest_matches(self, env):
        tmp_path, corpus, config_path = env
        assert run(["--config", str(config_path), "ingest",
                    "--source", str(corpus)]).exit_code == 0
        store = DomainStore(str(tmp_path / "store"))
        try:
            (group,) = [g for g in store.list_groups()
                        if g.source_external_id == HRWA_EXTERNAL_ID]
            out = tmp_path / "rt.jsonl"
            export_group(store, group.id, "jsonl", out)
            original = {
                r.url: (r.title, tuple(sorted(
                    c.capture_datetime for c in store.list_captures(r.id))))
                for r in store.list_resources(group.id)
            }
        finally:
            store.close()

        corpus2 = tmp_path / "corpus2"
        corpus_from_export(out, corpus2, "rt1", "Round Trip")
        store2 = DomainStore()
        try:
            group2, report = ingest_collection(
                store2, FixtureSourceAdapter(corpus2), "rt1")
            restored = {
                r.url: (r.title, tuple(sorted(
                    c.capture_datetime for c in store2.list_captures(r.id))))
                for r in store2.list_resources(group2.id)
            }
        finally:
            store2.close()
        assert restored == original
