/**
 * HTTP client for the local slicing service. Responses are plain text in
 * the formats this viewer already parses; error statuses carry a one-line
 * reason that gets surfaced verbatim on the form.
 *
 * What-if submissions race: only the newest one may land. The client keeps
 * a single AbortController and cancels the previous round trip whenever a
 * new one starts.
 */

import {
  parseMesh,
  parseTrace,
  splitSliceResponse,
  type MeshData,
  type Summary,
  type Trace,
} from "./formats.js";
import { fnv1a64, type RunResult } from "./state.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface WhatIfResult extends RunResult {
  gcode: string;
}

async function readBody(response: Response): Promise<string> {
  const text = await response.text();
  if (!response.ok) {
    throw new ApiError(response.status, text.trim() || `HTTP ${response.status}`);
  }
  return text;
}

export class ServiceClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;
  private inFlight: AbortController | null = null;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async get(path: string, signal?: AbortSignal): Promise<string> {
    const response = await this.fetchImpl(this.base + path, { signal });
    return readBody(response);
  }

  private async post(path: string, body: string, signal?: AbortSignal): Promise<string> {
    const response = await this.fetchImpl(this.base + path, {
      method: "POST",
      body,
      headers: { "Content-Type": "text/plain; charset=utf-8" },
      signal,
    });
    return readBody(response);
  }

  async health(): Promise<string> {
    return (await this.get("/health")).trim();
  }

  async mesh(): Promise<MeshData> {
    return parseMesh(await this.get("/mesh"));
  }

  async params(): Promise<string> {
    return this.get("/params");
  }

  async machine(): Promise<string> {
    return this.get("/machine");
  }

  async slice(paramsText: string, signal?: AbortSignal): Promise<{ summary: Summary; gcode: string }> {
    return splitSliceResponse(await this.post("/slice", paramsText, signal));
  }

  async simulate(body: string, signal?: AbortSignal): Promise<Trace> {
    return parseTrace(await this.post("/simulate", body, signal));
  }

  /**
   * Slice then simulate the resulting gcode. Starting a new what-if aborts
   * the one in flight, so at most one response ever reaches the caller.
   */
  async whatIf(paramsText: string): Promise<WhatIfResult> {
    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    try {
      const { summary, gcode } = await this.slice(paramsText, controller.signal);
      const trace = await this.simulate(gcode, controller.signal);
      return { summary, gcode, gcodeHash: fnv1a64(gcode), trace };
    } finally {
      if (this.inFlight === controller) this.inFlight = null;
    }
  }

  /** True when err is the cancellation of a superseded what-if. */
  static isAbort(err: unknown): boolean {
    return err instanceof DOMException && err.name === "AbortError";
  }
}
