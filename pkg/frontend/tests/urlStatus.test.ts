import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import {
  availableActions,
  lookupUrlStatus,
  statusLabel,
} from "../src/urlStatus.js";

function clientWith(
  status: number,
  payload: unknown,
  fail = false,
): ApiClient {
  const fetchFn: FetchLike = async () => {
    if (fail) throw new TypeError("network down");
    return { status, json: async () => payload };
  };
  return new ApiClient("http://api.test", fetchFn);
}

describe("lookupUrlStatus", () => {
  it("maps an indexed response to the indexed state with its span", async () => {
    const client = clientWith(200, {
      url: "http://x.com/",
      status: "indexed",
      first_capture: "2008-05-01T00:00:00+00:00",
      last_capture: "2015-07-31T00:00:00+00:00",
    });
    const state = await lookupUrlStatus(client, "http://x.com/");
    expect(state.kind).toBe("indexed");
    expect(statusLabel(state)).toBe("Archived 2008-05-01 to 2015-07-31");
    expect(availableActions(state).map((a) => a.id)).toEqual([
      "browse_captures",
    ]);
  });

  it("maps never_indexed to the archive-now offer", async () => {
    const client = clientWith(200, {
      url: "http://fresh.com/",
      status: "never_indexed",
      first_capture: null,
      last_capture: null,
    });
    const state = await lookupUrlStatus(client, "http://fresh.com/");
    expect(state.kind).toBe("never_indexed");
    expect(statusLabel(state)).toBe("Not yet archived");
    expect(availableActions(state).map((a) => a.id)).toEqual(["archive_now"]);
  });

  it("maps a 502 to lookup_failed with retry, not never_indexed", async () => {
    const client = clientWith(502, {
      code: "TransportError",
      message: "CDX lookup failed",
    });
    const state = await lookupUrlStatus(client, "http://down.com/");
    expect(state.kind).toBe("lookup_failed");
    expect(statusLabel(state)).toContain("TransportError");
    expect(availableActions(state).map((a) => a.id)).toEqual(["retry_lookup"]);
  });

  it("maps a thrown network error to lookup_failed", async () => {
    const client = clientWith(0, {}, true);
    const state = await lookupUrlStatus(client, "http://x.com/");
    expect(state.kind).toBe("lookup_failed");
  });

  it("the three terminal states are mutually distinguishable", async () => {
    const kinds = new Set(
      await Promise.all([
        lookupUrlStatus(
          clientWith(200, {
            url: "u",
            status: "indexed",
            first_capture: "2010-01-01T00:00:00+00:00",
            last_capture: "2010-01-02T00:00:00+00:00",
          }),
          "u",
        ),
        lookupUrlStatus(
          clientWith(200, {
            url: "u",
            status: "never_indexed",
            first_capture: null,
            last_capture: null,
          }),
          "u",
        ),
        lookupUrlStatus(clientWith(502, { code: "TransportError" }), "u"),
      ]).then((states) => states.map((s) => s.kind)),
    );
    expect(kinds).toEqual(
      new Set(["indexed", "never_indexed", "lookup_failed"]),
    );
  });
});
