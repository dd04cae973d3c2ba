import { describe, expect, it } from "vitest";

import type { GroupDetail, GroupSummary } from "../src/api.js";
import { deriveControls, mutationControlIds } from "../src/groupView.js";

function group(overrides: Partial<GroupSummary> = {}): GroupSummary {
  return {
    id: "g1",
    title: "G",
    description: "",
    origin: "user_created",
    read_only: false,
    parent_group: null,
    public: false,
    collecting_institution: null,
    subjects: [],
    ...overrides,
  };
}

function detail(
  overrides: Partial<GroupDetail> = {},
  groupOverrides: Partial<GroupSummary> = {},
): GroupDetail {
  return {
    group: group(groupOverrides),
    subgroups: [],
    resources: [],
    members: [],
    writable: false,
    ...overrides,
  };
}

describe("deriveControls", () => {
  it("offers every mutation control on a writable group", () => {
    const controls = deriveControls(detail({ writable: true }), true);
    expect(mutationControlIds(controls)).toEqual([
      "add-resource",
      "edit-metadata",
      "delete-resource",
      "annotate",
      "create-subgroup",
    ]);
    expect(controls.readOnlyBadge).toBe(false);
  });

  it("shows zero mutation controls on a read-only mirror, for any viewer", () => {
    const mirror = detail(
      { writable: false },
      { origin: "ingested", read_only: true, public: true },
    );
    for (const loggedIn of [false, true]) {
      const controls = deriveControls(mirror, loggedIn);
      expect(mutationControlIds(controls)).toEqual([]);
      expect(controls.readOnlyBadge).toBe(true);
      expect(controls.showJoin).toBe(false);
    }
  });

  it("keeps copy-to-my-groups available on read-only mirrors when logged in", () => {
    const mirror = detail(
      { writable: false },
      { origin: "ingested", read_only: true },
    );
    expect(deriveControls(mirror, true).showCopyGroup).toBe(true);
    expect(deriveControls(mirror, false).showCopyGroup).toBe(false);
  });

  it("hides mutation controls for anonymous viewers even if the server said writable", () => {
    const controls = deriveControls(detail({ writable: true }), false);
    expect(mutationControlIds(controls)).toEqual([]);
  });

  it("never offers subgroup creation inside a subgroup", () => {
    const sub = detail({ writable: true }, { parent_group: "parent" });
    expect(deriveControls(sub, true).showCreateSubgroup).toBe(false);
  });

  it("offers join only on joinable groups the viewer is not in", () => {
    expect(deriveControls(detail({ writable: false }), true).showJoin).toBe(
      true,
    );
    expect(deriveControls(detail({ writable: true }), true).showJoin).toBe(
      false,
    );
  });
});
