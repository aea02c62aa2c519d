/**
 * Wire types for the gateway JSON API. The explorer never computes over
 * document data; these shapes are rendered as received.
 */

/** Timestamps travel as a tagged object so they never collide with ints. */
export interface WireTimestamp {
  "@ts": number;
}

export type WireValue = string | number | boolean | WireTimestamp | null;

export interface FacetEntry {
  value: WireValue;
  count: number;
}

export interface Hit {
  id: string;
  version: number;
  score: number;
}

export interface Constraint {
  path: string;
  value: WireValue;
}

export interface SearchResponse {
  state: string;
  total: number;
  hits: Hit[];
  facets: Record<string, FacetEntry[]>;
  constraints: Constraint[];
}

export interface DocTreeNode {
  label: string;
  value?: WireValue;
  children?: DocTreeNode[];
}

export interface AnnotationEntity {
  path: string;
  span: [number, number];
  text: string;
  type: string;
}

export interface Annotation {
  id: string;
  producer: string;
  entities: AnnotationEntity[];
}

export interface DocumentResponse {
  id: string;
  version: number;
  latest: number;
  kind: string;
  format: string;
  ingested_at: number;
  root: DocTreeNode;
  references: string[];
  annotations: Annotation[];
}

export interface PathStep {
  id: string;
  relation: string;
}

export interface ConnectResponse {
  paths: PathStep[][];
}

export interface ErrorBody {
  error: {
    code: string;
    message: string;
  };
}

export function isWireTimestamp(value: WireValue): value is WireTimestamp {
  return typeof value === "object" && value !== null && "@ts" in value;
}

export function isErrorBody(body: unknown): body is ErrorBody {
  return (
    typeof body === "object" &&
    body !== null &&
    "error" in body &&
    typeof (body as ErrorBody).error?.code === "string"
  );
}
