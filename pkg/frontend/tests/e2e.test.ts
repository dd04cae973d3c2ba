/**
 * End-to-end checks against a live demo instance of the backend
 * (spawned here via `python3 -m webarc.serve --demo`): the timeline view
 * model over the dense art-site fixture totals 1418 captures, the
 * options dialog distinguishes its three archive-lookup states, and no
 * mutation control is derivable for read-only groups.
 */

import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { deriveControls, mutationControlIds } from "../src/groupView.js";
import { buildTimelineViewModel } from "../src/timeline.js";
import { lookupUrlStatus } from "../src/urlStatus.js";

const PORT = 8655;
const BASE = `http://127.0.0.1:${PORT}`;

const INDEXED_URL = "http://www.tibetinfonet.net/";
const NEVER_INDEXED_URL = "http://never-indexed.example.org/";
const LOOKUP_FAILS_URL = "http://lookup-fails.example.org/";

let server: ChildProcess;

async function waitForServer(timeoutMs = 90_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/api/groups`);
      if (response.status === 200) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("demo server did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "webarc.serve", "--demo", "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 100_000);

afterAll(() => {
  server?.kill();
});

describe("demo instance end to end", () => {
  const client = new ApiClient(BASE);

  async function findIngestedGroups() {
    const { groups } = await client.listGroups();
    return groups.filter((g) => g.origin === "ingested");
  }

  it("timeline view model totals 1418 captures for the art-site fixture", async () => {
    const groups = await findIngestedGroups();
    const artGroup = groups.find((g) => g.title === "Net Art Pioneers");
    expect(artGroup).toBeDefined();
    const detail = await client.getGroup(artGroup!.id);
    expect(detail.resources).toHaveLength(1);
    const timeline = await client.getTimeline(detail.resources[0]!.id);
    const vm = buildTimelineViewModel(timeline);
    expect(vm.totalCaptures).toBe(1418);
    expect(vm.firstMonth).toBe("2009-04");
    expect(vm.lastMonth).toBe("2016-03");
    expect(Math.max(...vm.bars.map((b) => b.heightFraction))).toBe(1);
  });

  it("options dialog distinguishes never-indexed / indexed / lookup-failed", async () => {
    const indexed = await lookupUrlStatus(client, INDEXED_URL);
    expect(indexed.kind).toBe("indexed");
    if (indexed.kind === "indexed") {
      expect(indexed.firstCapture.slice(0, 10)).toBe("2008-05-01");
      expect(indexed.lastCapture.slice(0, 10)).toBe("2015-07-31");
    }
    const fresh = await lookupUrlStatus(client, NEVER_INDEXED_URL);
    expect(fresh.kind).toBe("never_indexed");
    const failed = await lookupUrlStatus(client, LOOKUP_FAILS_URL);
    expect(failed.kind).toBe("lookup_failed");
  });

  it("read-only groups expose no mutation controls, even when logged in", async () => {
    await client.login("demo", "demo");
    for (const group of await findIngestedGroups()) {
      const detail = await client.getGroup(group.id);
      expect(detail.writable).toBe(false);
      const controls = deriveControls(detail, true);
      expect(mutationControlIds(controls)).toEqual([]);
      expect(controls.readOnlyBadge).toBe(true);
    }
  });

  it("the demo user's own group is writable with the full control set", async () => {
    await client.login("demo", "demo");
    const { groups } = await client.listGroups("My Nominations");
    const mine = groups.find((g) => g.title === "My Nominations");
    expect(mine).toBeDefined();
    const detail = await client.getGroup(mine!.id);
    expect(detail.writable).toBe(true);
    expect(mutationControlIds(deriveControls(detail, true))).toContain(
      "add-resource",
    );
  });

  it("search returns archive results before live results", async () => {
    const response = await client.search("q=human%20rights");
    const kinds = response.results.map((r) => r.kind);
    const lastArchive = kinds.lastIndexOf("archive");
    const firstLive = kinds.indexOf("live");
    if (lastArchive !== -1 && firstLive !== -1) {
      expect(firstLive).toBeGreaterThan(lastArchive);
    }
    expect(response.total).toBeGreaterThan(0);
  });
});
