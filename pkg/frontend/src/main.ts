/**
 * DOM wiring. All behaviour lives in the session and the pure renderers;
 * this file only routes events and swaps innerHTML.
 */
import { GatewayClient, GatewayError } from "./api";
import { renderDocument, renderError, renderPaths, renderResults } from "./render";
import { ExplorerSession } from "./session";
import { WireValue } from "./types";

function mount(): void {
  const resultsEl = document.getElementById("results");
  const documentEl = document.getElementById("document");
  const searchForm = document.getElementById("search-form") as HTMLFormElement | null;
  if (!resultsEl || !documentEl || !searchForm) {
    return;
  }
  const session = new ExplorerSession(new GatewayClient(""));

  const showResults = (): void => {
    if (session.current) {
      resultsEl.innerHTML = renderResults(session.current);
      history.replaceState(null, "", session.fragment ?? "#");
    }
  };

  const showFailure = (target: HTMLElement, err: unknown): void => {
    if (err instanceof GatewayError) {
      target.innerHTML = renderError({ error: { code: err.code, message: err.message } });
    } else {
      throw err;
    }
  };

  searchForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(searchForm);
    const terms = String(data.get("terms") ?? "").split(/\s+/).filter(Boolean);
    const facets = String(data.get("facets") ?? "").split(/\s+/).filter(Boolean);
    session
      .search({ terms, facets, k: 10 })
      .then(showResults)
      .catch((err) => showFailure(resultsEl, err));
  });

  resultsEl.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const facetButton = target.closest<HTMLElement>(".facet-value");
    if (facetButton) {
      const value = JSON.parse(facetButton.dataset.value ?? "null") as WireValue;
      session
        .drillDown(facetButton.dataset.facet ?? "", value)
        .then(showResults)
        .catch((err) => showFailure(resultsEl, err));
      return;
    }
    const removeButton = target.closest<HTMLElement>(".crumb-remove");
    if (removeButton) {
      session
        .removeCrumb(removeButton.dataset.facet ?? "")
        .then(showResults)
        .catch((err) => showFailure(resultsEl, err));
      return;
    }
    const hitLink = target.closest<HTMLElement>(".hit-link");
    if (hitLink) {
      event.preventDefault();
      session
        .openDocument(hitLink.dataset.doc ?? "")
        .then((doc) => {
          documentEl.innerHTML = renderDocument(doc);
        })
        .catch((err) => showFailure(documentEl, err));
    }
  });

  documentEl.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const connectButton = target.closest<HTMLElement>(".connect-from");
    if (connectButton) {
      session.startConnection(connectButton.dataset.doc ?? "");
      const to = window.prompt("connect to document id");
      if (to) {
        session
          .finishConnection(to)
          .then((paths) => {
            documentEl.insertAdjacentHTML("beforeend", renderPaths(paths));
          })
          .catch((err) => showFailure(documentEl, err));
      }
    }
  });

  if (location.hash) {
    session
      .restoreFromFragment(location.hash)
      .then(showResults)
      .catch((err) => showFailure(resultsEl, err));
  }
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", mount);
}
