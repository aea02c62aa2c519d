/**
 * Pure HTML-string renderers. Every count and score shown comes straight
 * from the response payload; nothing is recomputed on the client, so the
 * same response always renders to the same bytes.
 */
import {
  Annotation,
  ConnectResponse,
  DocTreeNode,
  DocumentResponse,
  ErrorBody,
  SearchResponse,
  WireValue,
  isWireTimestamp,
} from "./types";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function formatValue(value: WireValue): string {
  if (value === null || value === undefined) {
    return "(null)";
  }
  if (isWireTimestamp(value)) {
    return new Date(value["@ts"] * 1000).toISOString();
  }
  if (typeof value === "boolean") {
    return value ? "true" : "false";
  }
  return String(value);
}

/** Attribute-safe carrier for a typed value, decoded with JSON.parse. */
function valueAttr(value: WireValue): string {
  return escapeHtml(JSON.stringify(value ?? null));
}

function renderBreadcrumbs(response: SearchResponse): string {
  if (response.constraints.length === 0) {
    return '<nav class="breadcrumbs"></nav>';
  }
  const crumbs = response.constraints
    .map(
      (c) =>
        `<span class="crumb" data-facet="${escapeHtml(c.path)}">` +
        `${escapeHtml(c.path)} = ${escapeHtml(formatValue(c.value))}` +
        `<button class="crumb-remove" data-facet="${escapeHtml(c.path)}">` +
        `remove</button></span>`,
    )
    .join("");
  return `<nav class="breadcrumbs">${crumbs}</nav>`;
}

function renderFacetSidebar(response: SearchResponse): string {
  const sections = Object.entries(response.facets)
    .map(([path, entries]) => {
      const items = entries
        .map(
          (entry) =>
            `<li><button class="facet-value" data-facet="${escapeHtml(path)}"` +
            ` data-value="${valueAttr(entry.value)}">` +
            `${escapeHtml(formatValue(entry.value))}` +
            ` <span class="facet-count">(${entry.count})</span>` +
            `</button></li>`,
        )
        .join("");
      return (
        `<section class="facet" data-facet="${escapeHtml(path)}">` +
        `<h3>${escapeHtml(path)}</h3><ul>${items}</ul></section>`
      );
    })
    .join("");
  return `<aside class="facets">${sections}</aside>`;
}

function renderHitList(response: SearchResponse): string {
  if (response.hits.length === 0) {
    return '<p class="no-hits">No matching documents.</p>';
  }
  const items = response.hits
    .map(
      (hit) =>
        `<li class="hit"><a class="hit-link" data-doc="${escapeHtml(hit.id)}"` +
        ` data-version="${hit.version}" href="#doc=${escapeHtml(hit.id)}">` +
        `${escapeHtml(hit.id)}</a>` +
        ` <span class="hit-version">v${hit.version}</span>` +
        ` <span class="hit-score">${hit.score}</span></li>`,
    )
    .join("");
  return `<ol class="hits">${items}</ol>`;
}

export function renderResults(response: SearchResponse): string {
  return (
    '<div class="results">' +
    renderBreadcrumbs(response) +
    `<p class="total">${response.total} results</p>` +
    renderHitList(response) +
    renderFacetSidebar(response) +
    "</div>"
  );
}

/** Leaf text with <mark> wrapped around every entity span on this path. */
function highlightLeaf(text: string, path: string, annotations: Annotation[]): string {
  const spans = annotations
    .flatMap((a) => a.entities.filter((e) => e.path === path))
    .sort((a, b) => a.span[0] - b.span[0]);
  let cursor = 0;
  let html = "";
  for (const entity of spans) {
    const [start, end] = entity.span;
    if (start < cursor) {
      continue;
    }
    html += escapeHtml(text.slice(cursor, start));
    html +=
      `<mark class="entity" data-type="${escapeHtml(entity.type)}">` +
      `${escapeHtml(text.slice(start, end))}</mark>`;
    cursor = end;
  }
  html += escapeHtml(text.slice(cursor));
  return html;
}

function renderTree(node: DocTreeNode, path: string, annotations: Annotation[]): string {
  const children = node.children ?? [];
  let body = "";
  if (node.value !== undefined && node.value !== null) {
    body =
      typeof node.value === "string"
        ? `<span class="leaf">${highlightLeaf(node.value, path, annotations)}</span>`
        : `<span class="leaf">${escapeHtml(formatValue(node.value))}</span>`;
  } else if (children.length === 0) {
    body = '<span class="leaf null">(null)</span>';
  }
  const sub = children
    .map((child) => renderTree(child, `${path}/${child.label}`, annotations))
    .join("");
  return (
    `<li class="node" data-path="${escapeHtml(path)}">` +
    `<span class="label">${escapeHtml(node.label)}</span> ${body}` +
    (sub ? `<ul>${sub}</ul>` : "") +
    "</li>"
  );
}

function renderLineage(doc: DocumentResponse): string {
  const refs = doc.references
    .map((r) => `<li><a class="doc-link" data-doc="${escapeHtml(r)}">${escapeHtml(r)}</a></li>`)
    .join("");
  const notes = doc.annotations
    .map(
      (a) =>
        `<li class="annotation" data-annotation="${escapeHtml(a.id)}">` +
        `${escapeHtml(a.id)} by ${escapeHtml(a.producer)}` +
        ` (${a.entities.length} entities)</li>`,
    )
    .join("");
  return (
    '<section class="lineage">' +
    `<p>version ${doc.version} of ${doc.latest}, ${escapeHtml(doc.kind)}` +
    ` ${escapeHtml(doc.format)} document, ingested at ${doc.ingested_at}</p>` +
    `<h3>References</h3><ul>${refs}</ul>` +
    `<h3>Annotations</h3><ul>${notes}</ul>` +
    "</section>"
  );
}

export function renderDocument(doc: DocumentResponse): string {
  const rootPath = `/${doc.root.label}`;
  return (
    `<article class="document" data-doc="${escapeHtml(doc.id)}">` +
    `<h2>${escapeHtml(doc.id)} <small>v${doc.version}</small></h2>` +
    `<ul class="tree">${renderTree(doc.root, rootPath, doc.annotations)}</ul>` +
    renderLineage(doc) +
    `<button class="connect-from" data-doc="${escapeHtml(doc.id)}">connect to&hellip;</button>` +
    "</article>"
  );
}

export function renderPaths(response: ConnectResponse): string {
  if (response.paths.length === 0) {
    return '<p class="no-path">No connection found.</p>';
  }
  const items = response.paths
    .map((path) => {
      const steps = path
        .map(
          (step) =>
            `<span class="step" data-doc="${escapeHtml(step.id)}">` +
            `${escapeHtml(step.relation)} &rarr; ${escapeHtml(step.id)}</span>`,
        )
        .join(" ");
      return `<li class="path">${steps}</li>`;
    })
    .join("");
  return `<ol class="paths">${items}</ol>`;
}

export function renderError(body: ErrorBody): string {
  return (
    `<p class="error" data-code="${escapeHtml(body.error.code)}">` +
    `${escapeHtml(body.error.message)}</p>`
  );
}
