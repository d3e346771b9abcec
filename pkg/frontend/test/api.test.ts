import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";

function fakeFetch(status: number, body: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetchFn = (async (url: string | URL | Request, init?: RequestInit) => {
    calls.push({ url: String(url), init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
  return { fetchFn, calls };
}

describe("ApiClient", () => {
  it("submits runs with a JSON body", async () => {
    const { fetchFn, calls } = fakeFetch(202, { run_id: "abc" });
    const api = new ApiClient("http://x", fetchFn);
    const result = await api.submitRun("QkFTRTY0", "Clean the bottle");
    expect(result.run_id).toBe("abc");
    expect(calls[0]?.url).toBe("http://x/runs");
    expect(calls[0]?.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      image: "QkFTRTY0",
      instruction: "Clean the bottle",
    });
  });

  it("maps non-2xx responses to ApiError with detail", async () => {
    const { fetchFn } = fakeFetch(409, { detail: "a run is already in flight" });
    const api = new ApiClient("", fetchFn);
    await expect(api.submitRun("x", "y")).rejects.toThrowError(ApiError);
    await expect(api.submitRun("x", "y")).rejects.toMatchObject({
      status: 409,
      detail: "a run is already in flight",
    });
  });

  it("issues only documented endpoints", async () => {
    const { fetchFn, calls } = fakeFetch(200, { runs: [] });
    const api = new ApiClient("", fetchFn);
    await api.listRuns();
    await api.getScene().catch(() => undefined);
    await api.getRun("r1").catch(() => undefined);
    await api.approve("r1").catch(() => undefined);
    await api.reject("r1").catch(() => undefined);
    expect(calls.map((c) => c.url)).toEqual([
      "/runs",
      "/scene",
      "/runs/r1",
      "/runs/r1/approve",
      "/runs/r1/reject",
    ]);
    expect(calls[3]?.init?.method).toBe("POST");
    expect(calls[4]?.init?.method).toBe("POST");
  });
});
