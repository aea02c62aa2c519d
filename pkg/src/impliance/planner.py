"""Rule-based planning into a small fixed set of physical operators.

There is no cost-based search: the only statistic consulted is posting-list
length, used to pick the probe side of a join and to pre-compute idf weights.
The same request always produces a structurally identical plan.

Placement rules (enforced by the linter):
  * IndexScan / Fetch / Filter / PartialTopK run on data nodes
  * MergeTopK / IndexedNLJoin / Sort / GroupAggregate / FacetCount on grid nodes
  * Persist on cluster nodes
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Protocol

from .errors import InvalidRequest, NoIndexForJoin, UnknownPath, UnknownView
from .model import DocId, TypedValue

COMPARATORS = ("=", "<", "<=", ">", ">=")


class Flavor(Enum):
    DATA = "data"
    GRID = "grid"
    CLUSTER = "cluster"


class OpKind(Enum):
    INDEX_SCAN = "IndexScan"
    FETCH = "Fetch"
    FILTER = "Filter"
    PARTIAL_TOP_K = "PartialTopK"
    MERGE_TOP_K = "MergeTopK"
    INDEXED_NL_JOIN = "IndexedNLJoin"
    SORT = "Sort"
    GROUP_AGGREGATE = "GroupAggregate"
    FACET_COUNT = "FacetCount"
    PERSIST = "Persist"


_FLAVOR_OF = {
    OpKind.INDEX_SCAN: Flavor.DATA,
    OpKind.FETCH: Flavor.DATA,
    OpKind.FILTER: Flavor.DATA,
    OpKind.PARTIAL_TOP_K: Flavor.DATA,
    OpKind.MERGE_TOP_K: Flavor.GRID,
    OpKind.INDEXED_NL_JOIN: Flavor.GRID,
    OpKind.SORT: Flavor.GRID,
    OpKind.GROUP_AGGREGATE: Flavor.GRID,
    OpKind.FACET_COUNT: Flavor.GRID,
    OpKind.PERSIST: Flavor.CLUSTER,
}

_LEAF_OPS = {OpKind.INDEX_SCAN, OpKind.FETCH}


@dataclass(frozen=True)
class StructuralPredicate:
    path: str
    comparator: str
    value: TypedValue

    def __post_init__(self) -> None:
        if self.comparator not in COMPARATORS:
            raise InvalidRequest(f"unknown comparator {self.comparator!r}")


@dataclass
class SearchRequest:
    terms: list[str] = field(default_factory=list)
    structural: list[StructuralPredicate] = field(default_factory=list)
    constraints: list[tuple[str, TypedValue]] = field(default_factory=list)
    k: int = 10
    facets: list[str] = field(default_factory=list)
    join_annotations: bool = False
    persist_as: Optional[str] = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidRequest("result limit k must be >= 1")


@dataclass
class AggregateRequest:
    base: SearchRequest
    group_by: str
    measure: str
    fn: str  # count | sum | min | max | avg

    def __post_init__(self) -> None:
        if self.fn not in ("count", "sum", "min", "max", "avg"):
            raise InvalidRequest(f"unknown aggregate function {self.fn!r}")


@dataclass
class ConnectionRequest:
    a: DocId
    b: DocId
    max_hops: int = 6

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise InvalidRequest("connection endpoints must differ")
        if self.max_hops < 1:
            raise InvalidRequest("max_hops must be >= 1")


@dataclass
class ViewQuery:
    view: str
    selection: list[tuple[str, str, TypedValue]] = field(default_factory=list)
    projection: Optional[list[str]] = None
    join: Optional[tuple[str, str, str]] = None  # (other view, left col, right col)


@dataclass
class PlanNode:
    node_id: str
    op: OpKind
    flavor: Flavor
    params: dict[str, Any]
    inputs: list[str]


@dataclass
class QueryPlan:
    nodes: list[PlanNode]
    root: str
    outputs: list[str] = field(default_factory=list)  # result-bearing nodes

    def node(self, node_id: str) -> PlanNode:
        return next(n for n in self.nodes if n.node_id == node_id)

    def signature(self) -> tuple:
        """Structural identity for determinism checks."""
        return tuple(
            (n.node_id, n.op.value, n.flavor.value, tuple(sorted((k, repr(v)) for k, v in n.params.items())), tuple(n.inputs))
            for n in self.nodes
        )


class PlannerStats(Protocol):
    """The only statistics the planner is allowed to look at."""

    def scan_units(self) -> list[tuple[int, tuple[int, ...]]]: ...
    def corpus_size(self) -> int: ...
    def doc_frequency(self, token: str) -> int: ...
    def posting_length(self, path: str) -> int: ...
    def annotation_count(self) -> int: ...
    def path_indexed(self, path: str) -> bool: ...
    def view_exists(self, name: str) -> bool: ...
    def view_join_path(self, view: str, column: str) -> str: ...
    def normalize_path(self, path: str) -> str: ...


def idf(n_docs: int, df: int) -> float:
    """Inverse document frequency: ln(1 + N/df)."""
    return math.log(1.0 + n_docs / df) if df else 0.0


class Planner:
    def __init__(self, stats: PlannerStats):
        self.stats = stats

    def plan(self, request) -> QueryPlan:
        if isinstance(request, SearchRequest):
            return self._plan_search(request)
        if isinstance(request, AggregateRequest):
            return self._plan_aggregate(request)
        if isinstance(request, ConnectionRequest):
            return self._plan_connection(request)
        if isinstance(request, ViewQuery):
            return self._plan_view(request)
        raise InvalidRequest(f"cannot plan a {type(request).__name__}")

    # -- helpers ------------------------------------------------------------

    def _normalized(self, req: SearchRequest) -> SearchRequest:
        norm = self.stats.normalize_path
        return SearchRequest(
            terms=list(req.terms),
            structural=[StructuralPredicate(norm(s.path), s.comparator, s.value) for s in req.structural],
            constraints=[(norm(p), v) for p, v in req.constraints],
            k=req.k,
            facets=[norm(p) for p in req.facets],
            join_annotations=req.join_annotations,
            persist_as=req.persist_as,
        )

    def _match_stage(self, req: SearchRequest, nodes: list[PlanNode], counter: list[int]) -> list[str]:
        """Per-partition scan + filter; returns the Filter node ids."""
        n_docs = max(self.stats.corpus_size(), 1)
        weights = {t: idf(n_docs, self.stats.doc_frequency(t)) for t in req.terms}
        filters = []
        for partition, members in self.stats.scan_units():
            scan_ids = []
            for term in req.terms:
                nid = f"n{counter[0]}"
                counter[0] += 1
                nodes.append(PlanNode(nid, OpKind.INDEX_SCAN, Flavor.DATA,
                                      {"key": "token", "token": term, "partition": partition,
                                       "partitions": members}, []))
                scan_ids.append(nid)
            for pred in req.structural:
                nid = f"n{counter[0]}"
                counter[0] += 1
                nodes.append(PlanNode(nid, OpKind.INDEX_SCAN, Flavor.DATA,
                                      {"key": "struct", "path": pred.path, "comparator": pred.comparator,
                                       "value": pred.value, "partition": partition,
                                       "partitions": members}, []))
                scan_ids.append(nid)
            for path, value in req.constraints:
                nid = f"n{counter[0]}"
                counter[0] += 1
                nodes.append(PlanNode(nid, OpKind.INDEX_SCAN, Flavor.DATA,
                                      {"key": "struct", "path": path, "comparator": "=",
                                       "value": value, "partition": partition,
                                       "partitions": members}, []))
                scan_ids.append(nid)
            match_all = not scan_ids
            if match_all:
                # An unconstrained match still needs a leaf: fetch the
                # partition's latest documents instead of scanning an index.
                nid = f"n{counter[0]}"
                counter[0] += 1
                nodes.append(PlanNode(nid, OpKind.FETCH, Flavor.DATA,
                                      {"what": "docs", "partition": partition,
                                       "partitions": members}, []))
                scan_ids.append(nid)
            fid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(fid, OpKind.FILTER, Flavor.DATA,
                                  {"partition": partition, "partitions": members,
                                   "terms": list(req.terms),
                                   "idf": weights, "match_all": match_all}, scan_ids))
            filters.append(fid)
        return filters

    # -- search -------------------------------------------------------------

    def _plan_search(self, request: SearchRequest) -> QueryPlan:
        req = self._normalized(request)
        nodes: list[PlanNode] = []
        counter = [0]
        filters = self._match_stage(req, nodes, counter)
        topk_ids = []
        for fid in filters:
            partition = nodes[[n.node_id for n in nodes].index(fid)].params["partition"]
            tid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(tid, OpKind.PARTIAL_TOP_K, Flavor.DATA,
                                  {"k": req.k, "partition": partition}, [fid]))
            topk_ids.append(tid)
        merge_id = f"n{counter[0]}"
        counter[0] += 1
        nodes.append(PlanNode(merge_id, OpKind.MERGE_TOP_K, Flavor.GRID, {"k": req.k}, topk_ids))
        outputs = [merge_id]
        root = merge_id
        if req.facets:
            fc_id = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(fc_id, OpKind.FACET_COUNT, Flavor.GRID,
                                  {"facets": list(req.facets), "top": 20}, list(filters)))
            outputs.append(fc_id)
            root = fc_id
        if req.join_annotations:
            match_est = self._match_estimate(req)
            ann_est = self.stats.annotation_count()
            probe = self._probe_side(match_est, ann_est, "matches", "annotations")
            join_id = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(join_id, OpKind.INDEXED_NL_JOIN, Flavor.GRID,
                                  {"join": "annotates", "probe": probe}, [merge_id]))
            agg_id = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(agg_id, OpKind.GROUP_AGGREGATE, Flavor.GRID,
                                  {"group_by": "entity_type", "fn": "count"}, [join_id]))
            outputs.append(agg_id)
            root = agg_id
        if req.persist_as:
            pid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(pid, OpKind.PERSIST, Flavor.CLUSTER,
                                  {"name": req.persist_as}, [root]))
            root = pid
        return QueryPlan(nodes, root, outputs)

    def _match_estimate(self, req: SearchRequest) -> int:
        estimates = [self.stats.doc_frequency(t) for t in req.terms]
        estimates += [self.stats.posting_length(s.path) for s in req.structural]
        estimates += [self.stats.posting_length(p) for p, _ in req.constraints]
        return min(estimates) if estimates else self.stats.corpus_size()

    @staticmethod
    def _probe_side(left_est: int, right_est: int, left_key: str, right_key: str) -> str:
        # Probe with the smaller estimated input; ties go to the
        # lexicographically smaller index key.
        if left_est < right_est:
            return "left"
        if right_est < left_est:
            return "right"
        return "left" if left_key <= right_key else "right"

    # -- aggregate ----------------------------------------------------------

    def _plan_aggregate(self, request: AggregateRequest) -> QueryPlan:
        req = self._normalized(request.base)
        nodes: list[PlanNode] = []
        counter = [0]
        filters = self._match_stage(req, nodes, counter)
        agg_id = f"n{counter[0]}"
        counter[0] += 1
        norm = self.stats.normalize_path
        nodes.append(PlanNode(agg_id, OpKind.GROUP_AGGREGATE, Flavor.GRID,
                              {"group_by": norm(request.group_by),
                               "measure": norm(request.measure),
                               "fn": request.fn}, filters))
        return QueryPlan(nodes, agg_id, [agg_id])

    # -- connection ---------------------------------------------------------

    def _plan_connection(self, request: ConnectionRequest) -> QueryPlan:
        nodes: list[PlanNode] = []
        counter = [0]
        fetch_ids = []
        for partition, members in self.stats.scan_units():
            nid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(nid, OpKind.FETCH, Flavor.DATA,
                                  {"what": "edges", "partition": partition,
                                   "partitions": members}, []))
            fetch_ids.append(nid)
        prev = fetch_ids
        for hop in range(request.max_hops):
            jid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(jid, OpKind.INDEXED_NL_JOIN, Flavor.GRID,
                                  {"join": "edge_expand", "hop": hop + 1,
                                   "a": str(request.a), "b": str(request.b),
                                   "probe": "left"}, list(prev)))
            prev = [jid]
        sort_id = f"n{counter[0]}"
        counter[0] += 1
        nodes.append(PlanNode(sort_id, OpKind.SORT, Flavor.GRID,
                              {"order": "path_lex", "a": str(request.a),
                               "b": str(request.b), "max_hops": request.max_hops,
                               "limit": 10}, prev))
        return QueryPlan(nodes, sort_id, [sort_id])

    # -- view query ---------------------------------------------------------

    def _plan_view(self, request: ViewQuery) -> QueryPlan:
        if not self.stats.view_exists(request.view):
            raise UnknownView(f"view {request.view!r} is not registered")
        nodes: list[PlanNode] = []
        counter = [0]
        filter_ids = []
        for partition, members in self.stats.scan_units():
            nid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(nid, OpKind.FETCH, Flavor.DATA,
                                  {"what": "view_rows", "view": request.view,
                                   "partition": partition, "partitions": members}, []))
            fid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(fid, OpKind.FILTER, Flavor.DATA,
                                  {"partition": partition, "partitions": members,
                                   "selection": list(request.selection),
                                   "view": request.view, "match_all": not request.selection}, [nid]))
            filter_ids.append(fid)
        prev = filter_ids
        if request.join is not None:
            other, left_col, right_col = request.join
            if not self.stats.view_exists(other):
                raise UnknownView(f"view {other!r} is not registered")
            join_path = self.stats.view_join_path(other, right_col)
            if not join_path.startswith("@") and not self.stats.path_indexed(join_path):
                raise NoIndexForJoin(
                    f"no index supports joining on {other!r}.{right_col!r} "
                    f"(path {join_path!r}); the planner has no fallback"
                )
            left_est = self.stats.posting_length(self.stats.view_join_path(request.view, left_col)) \
                if not self.stats.view_join_path(request.view, left_col).startswith("@") else self.stats.corpus_size()
            right_est = self.stats.posting_length(join_path) if not join_path.startswith("@") else self.stats.corpus_size()
            probe = self._probe_side(left_est, right_est, request.view, other)
            jid = f"n{counter[0]}"
            counter[0] += 1
            nodes.append(PlanNode(jid, OpKind.INDEXED_NL_JOIN, Flavor.GRID,
                                  {"join": "view", "left_view": request.view,
                                   "right_view": other, "left_col": left_col,
                                   "right_col": right_col, "probe": probe}, list(prev)))
            prev = [jid]
        sort_id = f"n{counter[0]}"
        counter[0] += 1
        nodes.append(PlanNode(sort_id, OpKind.SORT, Flavor.GRID,
                              {"order": "row_lex",
                               "projection": request.projection}, list(prev)))
        return QueryPlan(nodes, sort_id, [sort_id])


class PlanLintError(ValueError):
    pass


def lint(plan: QueryPlan) -> None:
    """Check structural and placement invariants; raises PlanLintError."""
    ids = [n.node_id for n in plan.nodes]
    if len(set(ids)) != len(ids):
        raise PlanLintError("duplicate node ids")
    known = set(ids)
    for node in plan.nodes:
        for i in node.inputs:
            if i not in known:
                raise PlanLintError(f"{node.node_id} references unknown input {i}")
        if not node.inputs and node.op not in _LEAF_OPS:
            raise PlanLintError(f"leaf {node.node_id} is a {node.op.value}; leaves must be IndexScan/Fetch")
        if node.inputs and node.op in _LEAF_OPS:
            raise PlanLintError(f"{node.op.value} {node.node_id} must be a leaf")
        expected = _FLAVOR_OF[node.op]
        if node.flavor is not expected:
            raise PlanLintError(
                f"{node.node_id}: {node.op.value} must be tagged {expected.value}, got {node.flavor.value}"
            )
    # Acyclicity via topological elimination.
    remaining = {n.node_id: set(n.inputs) for n in plan.nodes}
    while remaining:
        ready = [nid for nid, deps in remaining.items() if not deps]
        if not ready:
            raise PlanLintError("plan DAG contains a cycle")
        for nid in ready:
            del remaining[nid]
            for deps in remaining.values():
                deps.discard(nid)
    if plan.root not in known:
        raise PlanLintError("root is not a plan node")
