import { describe, expect, it } from "vitest";
import { ApiError, ServiceClient, type FetchLike } from "../src/api.js";
import { fnv1a64 } from "../src/state.js";
import { fixture } from "./helpers.js";

const sliceResponse = fixture("slice_response.txt");
const planarTrace = fixture("small_plate.trace");

function textResponse(body: string, status = 200): Response {
  return new Response(body, { status, headers: { "Content-Type": "text/plain" } });
}

/** Routes requests by method+path and records every call. */
function routedFetch(
  routes: Record<string, (body: string | undefined) => Response>,
): { fetchImpl: FetchLike; calls: string[] } {
  const calls: string[] = [];
  const fetchImpl: FetchLike = (url, init) => {
    const path = new URL(url).pathname;
    const key = `${init?.method ?? "GET"} ${path}`;
    calls.push(key);
    const route = routes[key];
    if (route === undefined) return Promise.resolve(textResponse("no such resource\n", 404));
    return Promise.resolve(route(init?.body as string | undefined));
  };
  return { fetchImpl, calls };
}

describe("ServiceClient", () => {
  it("parses health, slice, and simulate responses", async () => {
    const { fetchImpl } = routedFetch({
      "GET /health": () => textResponse("ok demo:flat_plate\n"),
      "POST /slice": () => textResponse(sliceResponse),
      "POST /simulate": () => textResponse(planarTrace),
    });
    const client = new ServiceClient("http://service.test", fetchImpl);
    expect(await client.health()).toBe("ok demo:flat_plate");
    const { summary, gcode } = await client.slice("open5x-params v1\n");
    expect(summary.get("paths")).toBe(6);
    expect(gcode.startsWith("G21")).toBe(true);
    const trace = await client.simulate(gcode);
    expect(trace.frames.length).toBeGreaterThan(0);
  });

  it("raises ApiError carrying the status and server message", async () => {
    const { fetchImpl } = routedFetch({
      "POST /slice": () => textResponse("params error: layer_height: must be > 0\n", 400),
    });
    const client = new ServiceClient("http://service.test", fetchImpl);
    const err = await client.slice("open5x-params v1\nlayer_height -1\n").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.message).toBe("params error: layer_height: must be > 0");
  });

  it("trims trailing slashes from the base url", async () => {
    const { fetchImpl, calls } = routedFetch({
      "GET /health": () => textResponse("ok x"),
    });
    const client = new ServiceClient("http://service.test///", fetchImpl);
    await client.health();
    expect(calls).toEqual(["GET /health"]);
  });

  it("whatIf returns summary, gcode hash, and parsed trace", async () => {
    const { fetchImpl, calls } = routedFetch({
      "POST /slice": () => textResponse(sliceResponse),
      "POST /simulate": () => textResponse(planarTrace),
    });
    const client = new ServiceClient("http://service.test", fetchImpl);
    const result = await client.whatIf("open5x-params v1\n");
    expect(result.summary.get("segments")).toBe(199);
    expect(result.gcodeHash).toBe(fnv1a64(result.gcode));
    expect(result.trace.frames.length).toBe(200);
    expect(calls).toEqual(["POST /slice", "POST /simulate"]);
  });

  it("a newer whatIf aborts the one in flight", async () => {
    let sliceCalls = 0;
    const fetchImpl: FetchLike = (url, init) => {
      const path = new URL(url).pathname;
      if (path === "/slice") {
        sliceCalls += 1;
        if (sliceCalls === 1) {
          // First slice hangs until its signal aborts.
          return new Promise((_resolve, reject) => {
            init?.signal?.addEventListener("abort", () =>
              reject(new DOMException("Aborted", "AbortError")),
            );
          });
        }
        return Promise.resolve(textResponse(sliceResponse));
      }
      return Promise.resolve(textResponse(planarTrace));
    };
    const client = new ServiceClient("http://service.test", fetchImpl);
    const first = client.whatIf("open5x-params v1\nlayer_height 0.1\n");
    const second = client.whatIf("open5x-params v1\nlayer_height 0.2\n");
    const firstErr = await first.catch((e) => e);
    expect(ServiceClient.isAbort(firstErr)).toBe(true);
    const result = await second;
    expect(result.trace.frames.length).toBe(200);
    expect(sliceCalls).toBe(2);
  });

  it("isAbort is false for ordinary errors", () => {
    expect(ServiceClient.isAbort(new Error("boom"))).toBe(false);
    expect(ServiceClient.isAbort(new ApiError(400, "bad"))).toBe(false);
  });
});
