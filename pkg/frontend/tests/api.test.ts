import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, FetchLike } from "../src/api.js";

interface Recorded {
  url: string;
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

function recordingClient(
  responses: Record<string, { status: number; payload: unknown }>,
): { client: ApiClient; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, ...init });
    const match = responses[url] ?? { status: 404, payload: { code: "NotFound" } };
    return { status: match.status, json: async () => match.payload };
  };
  return { client: new ApiClient("http://api.test", fetchFn), calls };
}

describe("ApiClient", () => {
  it("stores the session token and sends it as a bearer header", async () => {
    const { client, calls } = recordingClient({
      "http://api.test/api/session": {
        status: 200,
        payload: { token: "tok123", user_id: "u", username: "demo", role: "curator" },
      },
      "http://api.test/api/groups": { status: 200, payload: { groups: [] } },
    });
    await client.login("demo", "demo");
    await client.listGroups();
    expect(calls[1]?.headers?.["Authorization"]).toBe("Bearer tok123");
  });

  it("raises ApiError with the server's code on 4xx", async () => {
    const { client } = recordingClient({
      "http://api.test/api/groups/g9": {
        status: 404,
        payload: { code: "UnknownGroup", message: "no such group" },
      },
    });
    await expect(client.getGroup("g9")).rejects.toMatchObject({
      status: 404,
      code: "UnknownGroup",
    });
    await expect(client.getGroup("g9")).rejects.toBeInstanceOf(ApiError);
  });

  it("url-encodes lookup parameters", async () => {
    const { client, calls } = recordingClient({});
    await client
      .getUrlStatus("http://a.com/?x=1&y=2")
      .catch(() => undefined);
    expect(calls[0]?.url).toBe(
      "http://api.test/api/url-status?url=http%3A%2F%2Fa.com%2F%3Fx%3D1%26y%3D2",
    );
  });

  it("serializes mutation bodies as JSON", async () => {
    const { client, calls } = recordingClient({
      "http://api.test/api/groups/g1/resources": {
        status: 201,
        payload: { id: "r1" },
      },
    });
    await client.addResource("g1", { url: "http://x.com/", title: "X" });
    expect(calls[0]?.method).toBe("POST");
    expect(JSON.parse(calls[0]?.body ?? "{}")).toEqual({
      url: "http://x.com/",
      title: "X",
    });
    expect(calls[0]?.headers?.["Content-Type"]).toBe("application/json");
  });
});
