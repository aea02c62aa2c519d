/**
 * Explorer session: the current drill state, the selected document, and the
 * connection endpoints. The whole result view is a function of the server's
 * serialized drill state, so a session can be rebuilt from a URL fragment.
 *
 * Every outgoing search or drill carries a sequence number; a response is
 * applied only if no newer request was issued in the meantime, so slow
 * responses can never overwrite fresh ones.
 */
import { DrillBody, GatewayClient, SearchBody } from "./api";
import {
  ConnectResponse,
  Constraint,
  DocumentResponse,
  SearchResponse,
  WireValue,
} from "./types";

const FRAGMENT_PREFIX = "#s=";

export function stateToFragment(state: string): string {
  return FRAGMENT_PREFIX + encodeURIComponent(state);
}

export function stateFromFragment(fragment: string): string | null {
  if (!fragment.startsWith(FRAGMENT_PREFIX)) {
    return null;
  }
  return decodeURIComponent(fragment.slice(FRAGMENT_PREFIX.length));
}

export class ExplorerSession {
  current: SearchResponse | null = null;
  selectedDocument: DocumentResponse | null = null;
  connection: ConnectResponse | null = null;
  connectFrom: string | null = null;

  private issued = 0;
  private applied = 0;

  constructor(private readonly client: GatewayClient) {}

  get breadcrumbs(): Constraint[] {
    return this.current ? this.current.constraints : [];
  }

  get state(): string | null {
    return this.current ? this.current.state : null;
  }

  get fragment(): string | null {
    return this.current ? stateToFragment(this.current.state) : null;
  }

  /** Apply a response only if it answers the most recent request. */
  private apply(seq: number, response: SearchResponse): boolean {
    if (seq < this.issued || seq <= this.applied) {
      return false;
    }
    this.applied = seq;
    this.current = response;
    return true;
  }

  private async run(send: () => Promise<SearchResponse>): Promise<SearchResponse | null> {
    const seq = ++this.issued;
    const response = await send();
    return this.apply(seq, response) ? response : null;
  }

  search(body: SearchBody): Promise<SearchResponse | null> {
    return this.run(() => this.client.search(body));
  }

  /** Rebuild the result view from a serialized drill state alone. */
  restore(state: string): Promise<SearchResponse | null> {
    return this.run(() => this.client.search({ state }));
  }

  restoreFromFragment(fragment: string): Promise<SearchResponse | null> {
    const state = stateFromFragment(fragment);
    if (state === null) {
      return Promise.resolve(null);
    }
    return this.restore(state);
  }

  private drill(body: Omit<DrillBody, "state">): Promise<SearchResponse | null> {
    const state = this.state;
    if (state === null) {
      throw new Error("no search is active");
    }
    return this.run(() => this.client.drill({ state, ...body }));
  }

  drillDown(facet: string, value: WireValue): Promise<SearchResponse | null> {
    return this.drill({ action: "down", facet, value });
  }

  drillAcross(facets: string[]): Promise<SearchResponse | null> {
    return this.drill({ action: "across", facets });
  }

  removeCrumb(facet: string): Promise<SearchResponse | null> {
    return this.drill({ action: "remove", facet });
  }

  async openDocument(id: string, version?: number): Promise<DocumentResponse> {
    const doc = await this.client.document(id, version);
    this.selectedDocument = doc;
    this.connection = null;
    return doc;
  }

  startConnection(from: string): void {
    this.connectFrom = from;
    this.connection = null;
  }

  async finishConnection(to: string, maxHops?: number): Promise<ConnectResponse> {
    if (this.connectFrom === null) {
      throw new Error("no connection endpoint selected");
    }
    const result = await this.client.connect(this.connectFrom, to, maxHops);
    this.connection = result;
    return result;
  }
}
