/**
 * Thin gateway client. All traffic is JSON over the documented endpoints;
 * error envelopes become GatewayError so callers can branch on the code.
 */
import {
  ConnectResponse,
  DocumentResponse,
  SearchResponse,
  WireValue,
  isErrorBody,
} from "./types";

export class GatewayError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "GatewayError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SearchBody {
  terms?: string[];
  k?: number;
  facets?: string[];
  structural?: { path: string; comparator: string; value: WireValue }[];
  constraints?: { path: string; value: WireValue }[];
  state?: string;
}

export interface DrillBody {
  state: string;
  action: "down" | "across" | "remove";
  facet?: string;
  value?: WireValue;
  facets?: string[];
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const payload: unknown = await response.json();
    if (isErrorBody(payload)) {
      throw new GatewayError(payload.error.code, payload.error.message, response.status);
    }
    return payload as T;
  }

  search(body: SearchBody): Promise<SearchResponse> {
    return this.request("POST", "/search", body);
  }

  drill(body: DrillBody): Promise<SearchResponse> {
    return this.request("POST", "/drill", body);
  }

  document(id: string, version?: number): Promise<DocumentResponse> {
    const suffix = version === undefined ? "" : `?version=${version}`;
    return this.request("GET", `/docs/${encodeURIComponent(id)}${suffix}`);
  }

  connect(a: string, b: string, maxHops?: number): Promise<ConnectResponse> {
    const params = new URLSearchParams({ a, b });
    if (maxHops !== undefined) {
      params.set("max_hops", String(maxHops));
    }
    return this.request("GET", `/connect?${params.toString()}`);
  }
}
