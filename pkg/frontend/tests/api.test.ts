import { describe, expect, it, vi } from "vitest";

import { ApiError, EngineClient } from "../src/api.js";

function stubFetch(status: number, body: unknown) {
  return vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  });
}

describe("EngineClient", () => {
  it("builds search URLs with reserved and field params", async () => {
    const fetchFn = stubFetch(200, { results: [], total: 0 });
    const client = new EngineClient("http://engine:8040/", fetchFn);
    await client.search({ query: "term", type: "Host", filters: { location: "Sydney" } });
    const url = fetchFn.mock.calls[0][0] as string;
    expect(url).toBe("http://engine:8040/search?query=term&type=Host&location=Sydney");
  });

  it("uses PUT for field modification with a JSON body", async () => {
    const fetchFn = stubFetch(200, { enhancement_id: "enh:1", status: "pending", plans: [] });
    const client = new EngineClient("http://engine:8040", fetchFn);
    await client.modifyField("participant:1", "description", "v2");
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe("http://engine:8040/participant%3A1/fields/description");
    expect(init?.method).toBe("PUT");
    expect(JSON.parse(init?.body as string)).toEqual({ value: "v2" });
  });

  it("hits the neighbors URL form with a kind segment", async () => {
    const fetchFn = stubFetch(200, []);
    const client = new EngineClient("http://engine:8040", fetchFn);
    await client.neighbors("SYSTEM1", "host");
    expect(fetchFn.mock.calls[0][0]).toBe("http://engine:8040/SYSTEM1/neighbors/host/");
  });

  it("surfaces server errors with status and reason", async () => {
    const fetchFn = stubFetch(404, { error: "not found: ghost" });
    const client = new EngineClient("http://engine:8040", fetchFn);
    await expect(client.lineage("ghost")).rejects.toMatchObject({
      status: 404,
      message: "not found: ghost",
    });
  });

  it("carries ambiguity candidates through", async () => {
    const fetchFn = stubFetch(409, {
      error: "name 'ERP' is ambiguous",
      candidates: ["participant:1", "participant:2"],
    });
    const client = new EngineClient("http://engine:8040", fetchFn);
    const error = await client.project("ERP", []).catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.candidates).toEqual(["participant:1", "participant:2"]);
  });
});
