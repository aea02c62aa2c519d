import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { DrillBody, FetchLike, GatewayClient, GatewayError, SearchBody } from "../src/api";
import { renderResults } from "../src/render";
import {
  ExplorerSession,
  stateFromFragment,
  stateToFragment,
} from "../src/session";
import { SearchResponse } from "../src/types";

function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

const search = fixture<SearchResponse>("search");
const drillDown = fixture<SearchResponse>("drill_down");
const drillRemove = fixture<SearchResponse>("drill_remove");
const searchFromState = fixture<SearchResponse>("search_from_state");

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Client stub replaying fixture responses; promises resolve on demand. */
class FixtureGateway extends GatewayClient {
  readonly searches: SearchBody[] = [];
  readonly drills: DrillBody[] = [];
  private readonly pending: ((r: SearchResponse) => void)[] = [];

  constructor(private readonly immediate = true) {
    super("", () => Promise.reject(new Error("fetch must not be used")));
  }

  override search(body: SearchBody): Promise<SearchResponse> {
    this.searches.push(body);
    return this.answer(body.state ? searchFromState : search);
  }

  override drill(body: DrillBody): Promise<SearchResponse> {
    this.drills.push(body);
    return this.answer(body.action === "remove" ? drillRemove : drillDown);
  }

  private answer(response: SearchResponse): Promise<SearchResponse> {
    if (this.immediate) {
      return Promise.resolve(response);
    }
    return new Promise((resolve) => this.pending.push(resolve));
  }

  release(index: number, response: SearchResponse): void {
    this.pending[index]!(response);
  }
}

describe("ExplorerSession", () => {
  it("tracks the server drill state and breadcrumb trail", async () => {
    const session = new ExplorerSession(new FixtureGateway());
    await session.search({ terms: [], k: 5, facets: ["/json/region"] });
    expect(session.state).toBe(search.state);
    expect(session.breadcrumbs).toEqual([]);

    await session.drillDown("/json/region", "north");
    expect(session.state).toBe(drillDown.state);
    expect(session.breadcrumbs).toEqual(drillDown.constraints);

    await session.removeCrumb("/json/region");
    expect(session.breadcrumbs).toEqual([]);
    expect(session.state).toBe(drillRemove.state);
  });

  it("sends the current state with every drill request", async () => {
    const gateway = new FixtureGateway();
    const session = new ExplorerSession(gateway);
    await session.search({ terms: [] });
    await session.drillDown("/json/region", "north");
    expect(gateway.drills[0]).toEqual({
      state: search.state,
      action: "down",
      facet: "/json/region",
      value: "north",
    });
  });

  it("discards stale responses by request sequence number", async () => {
    const gateway = new FixtureGateway(false);
    const session = new ExplorerSession(gateway);
    const slow = session.search({ terms: ["old"] });
    const fast = session.search({ terms: ["new"] });

    gateway.release(1, drillDown);
    expect(await fast).toBe(drillDown);
    expect(session.current).toBe(drillDown);

    gateway.release(0, search);
    expect(await slow).toBeNull();
    expect(session.current).toBe(drillDown);
  });

  it("refuses to drill before any search is active", () => {
    const session = new ExplorerSession(new FixtureGateway());
    expect(() => session.drillDown("/json/region", "x")).toThrow("no search is active");
  });
});

describe("deep links", () => {
  it("round-trips a serialized state through the fragment", () => {
    const fragment = stateToFragment(drillDown.state);
    expect(fragment.startsWith("#s=")).toBe(true);
    expect(stateFromFragment(fragment)).toBe(drillDown.state);
    expect(stateFromFragment("#other")).toBeNull();
  });

  it("reconstructs the exact result view from a fragment alone", async () => {
    const gateway = new FixtureGateway();
    const session = new ExplorerSession(gateway);
    const fragment = stateToFragment(drillDown.state);

    await session.restoreFromFragment(fragment);
    expect(gateway.searches[0]).toEqual({ state: drillDown.state });
    expect(renderResults(session.current!)).toBe(renderResults(drillDown));
    expect(session.breadcrumbs).toEqual(drillDown.constraints);
  });
});

describe("GatewayClient", () => {
  it("posts JSON and parses responses", async () => {
    const calls: { url: string; init?: RequestInit }[] = [];
    const fetchFn: FetchLike = (url, init) => {
      calls.push({ url, init });
      return Promise.resolve(jsonResponse(search));
    };
    const client = new GatewayClient("http://appliance", fetchFn);
    const result = await client.search({ terms: ["alpha"], k: 5 });
    expect(result).toEqual(search);
    expect(calls[0]!.url).toBe("http://appliance/search");
    expect(JSON.parse(String(calls[0]!.init!.body))).toEqual({ terms: ["alpha"], k: 5 });
  });

  it("turns error envelopes into GatewayError", async () => {
    const body = fixture("error_unknown_doc");
    const client = new GatewayClient("", () => Promise.resolve(jsonResponse(body, 404)));
    await expect(client.document("1-999")).rejects.toMatchObject({
      name: "GatewayError",
      code: "unknown_doc",
      status: 404,
    });
  });

  it("encodes connection endpoints in the query string", async () => {
    const urls: string[] = [];
    const client = new GatewayClient("", (url) => {
      urls.push(url);
      return Promise.resolve(jsonResponse({ paths: [] }));
    });
    await client.connect("1-1", "1-2", 3);
    expect(urls[0]).toBe("/connect?a=1-1&b=1-2&max_hops=3");
  });
});
