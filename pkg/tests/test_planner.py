"""Rule-based planner: shapes, placement tags, probe side, linter."""
from __future__ import annotations

import math

import pytest

from impliance.errors import NoIndexForJoin, UnknownView
from impliance.model import DocId
from impliance.planner import (
    AggregateRequest,
    ConnectionRequest,
    Flavor,
    OpKind,
    PlanLintError,
    PlanNode,
    Planner,
    QueryPlan,
    SearchRequest,
    StructuralPredicate,
    ViewQuery,
    idf,
    lint,
)


class StubStats:
    """Deterministic statistics source standing in for the engine."""

    def __init__(self, units=4, corpus=100, df=None, postings=None,
                 annotations=10, indexed=("/row/id",), views=None):
        self._units = [(i * 8, tuple(range(i * 8, i * 8 + 8))) for i in range(units)]
        self._corpus = corpus
        self._df = df or {}
        self._postings = postings or {}
        self._annotations = annotations
        self._indexed = set(indexed)
        self._views = views or {"orders": {"id": "/row/id", "who": "/row/who"},
                                "people": {"pid": "/row/id", "name": "/row/name"}}

    def scan_units(self):
        return list(self._units)

    def corpus_size(self):
        return self._corpus

    def doc_frequency(self, token):
        return self._df.get(token, 5)

    def posting_length(self, path):
        return self._postings.get(path, 10)

    def annotation_count(self):
        return self._annotations

    def path_indexed(self, path):
        return path in self._indexed

    def view_exists(self, name):
        return name in self._views

    def view_join_path(self, view, column):
        return self._views[view][column]

    def normalize_path(self, path):
        return path


def _ops(plan: QueryPlan) -> dict[OpKind, int]:
    counts: dict[OpKind, int] = {}
    for node in plan.nodes:
        counts[node.op] = counts.get(node.op, 0) + 1
    return counts


class TestSearchPlans:
    def test_canonical_single_term_shape(self):
        # One keyword over four data-node slices: a scan and a partial top-k
        # per slice, merged once on a grid node.
        planner = Planner(StubStats(units=4))
        plan = planner.plan(SearchRequest(terms=["ada"], k=10))
        counts = _ops(plan)
        assert counts[OpKind.INDEX_SCAN] == 4
        assert counts[OpKind.PARTIAL_TOP_K] == 4
        assert counts[OpKind.MERGE_TOP_K] == 1
        lint(plan)

    def test_flavor_tags_follow_rules(self):
        planner = Planner(StubStats())
        plan = planner.plan(SearchRequest(
            terms=["a"], facets=["/row/id"], join_annotations=True, persist_as="saved",
        ))
        for node in plan.nodes:
            if node.op in (OpKind.INDEX_SCAN, OpKind.FETCH, OpKind.FILTER, OpKind.PARTIAL_TOP_K):
                assert node.flavor is Flavor.DATA
            elif node.op is OpKind.PERSIST:
                assert node.flavor is Flavor.CLUSTER
            else:
                assert node.flavor is Flavor.GRID
        lint(plan)

    def test_unconstrained_search_uses_fetch_leaves(self):
        plan = Planner(StubStats(units=2)).plan(SearchRequest(terms=[]))
        counts = _ops(plan)
        assert counts[OpKind.FETCH] == 2
        assert OpKind.INDEX_SCAN not in counts
        lint(plan)

    def test_structural_predicates_add_scans(self):
        plan = Planner(StubStats(units=2)).plan(SearchRequest(
            terms=["x"], structural=[StructuralPredicate("/row/n", ">", 5)],
        ))
        assert _ops(plan)[OpKind.INDEX_SCAN] == 4  # (1 term + 1 pred) x 2 units
        lint(plan)

    def test_same_request_same_plan(self):
        planner = Planner(StubStats())
        request = SearchRequest(terms=["a", "b"], k=3, facets=["/row/id"])
        assert planner.plan(request).signature() == planner.plan(request).signature()

    def test_idf_weights_precomputed(self):
        planner = Planner(StubStats(corpus=100, df={"rare": 2}))
        plan = planner.plan(SearchRequest(terms=["rare"]))
        filters = [n for n in plan.nodes if n.op is OpKind.FILTER]
        assert filters[0].params["idf"]["rare"] == pytest.approx(math.log(1 + 100 / 2))


class TestProbeSide:
    def test_smaller_estimate_probes(self):
        assert Planner._probe_side(3, 9, "a", "b") == "left"
        assert Planner._probe_side(9, 3, "a", "b") == "right"

    def test_tie_breaks_on_lexicographic_key(self):
        assert Planner._probe_side(5, 5, "alpha", "beta") == "left"
        assert Planner._probe_side(5, 5, "zeta", "beta") == "right"


class TestOtherPlans:
    def test_aggregate_plan(self):
        plan = Planner(StubStats()).plan(
            AggregateRequest(SearchRequest(terms=["x"]), "/row/g", "/row/m", "sum"))
        assert plan.node(plan.root).op is OpKind.GROUP_AGGREGATE
        lint(plan)

    def test_connection_plan_has_one_join_per_hop(self):
        plan = Planner(StubStats()).plan(ConnectionRequest(DocId(1, 1), DocId(1, 2), max_hops=3))
        assert _ops(plan)[OpKind.INDEXED_NL_JOIN] == 3
        assert plan.node(plan.root).op is OpKind.SORT
        lint(plan)

    def test_view_join_requires_indexed_path(self):
        planner = Planner(StubStats(indexed=()))
        with pytest.raises(NoIndexForJoin):
            planner.plan(ViewQuery("orders", join=("people", "who", "pid")))

    def test_view_join_allowed_when_indexed(self):
        plan = Planner(StubStats(indexed=("/row/id",))).plan(
            ViewQuery("orders", join=("people", "who", "pid")))
        lint(plan)

    def test_unknown_view_rejected(self):
        with pytest.raises(UnknownView):
            Planner(StubStats()).plan(ViewQuery("missing"))


class TestLinter:
    def _leaf(self, nid="s"):
        return PlanNode(nid, OpKind.INDEX_SCAN, Flavor.DATA, {}, [])

    def test_rejects_wrong_flavor(self):
        bad = QueryPlan([
            self._leaf(),
            PlanNode("m", OpKind.MERGE_TOP_K, Flavor.DATA, {}, ["s"]),
        ], "m")
        with pytest.raises(PlanLintError):
            lint(bad)

    def test_rejects_non_scan_leaf(self):
        bad = QueryPlan([PlanNode("f", OpKind.FILTER, Flavor.DATA, {}, [])], "f")
        with pytest.raises(PlanLintError):
            lint(bad)

    def test_rejects_cycle(self):
        bad = QueryPlan([
            PlanNode("a", OpKind.SORT, Flavor.GRID, {}, ["b"]),
            PlanNode("b", OpKind.SORT, Flavor.GRID, {}, ["a"]),
        ], "a")
        with pytest.raises(PlanLintError):
            lint(bad)

    def test_rejects_unknown_input(self):
        bad = QueryPlan([PlanNode("a", OpKind.SORT, Flavor.GRID, {}, ["ghost"])], "a")
        with pytest.raises(PlanLintError):
            lint(bad)

    def test_rejects_duplicate_ids(self):
        bad = QueryPlan([self._leaf("x"), self._leaf("x")], "x")
        with pytest.raises(PlanLintError):
            lint(bad)


def test_idf_formula():
    assert idf(100, 10) == pytest.approx(math.log(11.0))
    assert idf(100, 0) == 0.0
