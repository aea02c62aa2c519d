"""The appliance engine: one object wiring storage, indexing, discovery,
query execution, and the simulated cluster together.

All mutation flows through here. Ingest persists synchronously and enqueues
index and annotator work as background tasks on the fabric; queries are
planned, linted, and dispatched as interactive work; quiesce methods drain
the background categories so tests can assert oracle equality.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import discovery
from .config import ApplianceConfig
from .discovery import (
    AnnotatorScope,
    AnnotatorSpec,
    Entity,
    EntityRegistry,
    JoinIndex,
    annotation_tree,
    entities_of,
    run_intra,
)
from .errors import (
    DuplicateAnnotator,
    InvalidRequest,
    UnknownDoc,
    UnknownPath,
    UnknownView,
)
from .fabric import Fabric, Flavor, NodeState, Priority, Task, TaskResult, TraceRecord
from .index import IndexEpoch, IndexKey, IndexManager
from .model import (
    DocId,
    DocNode,
    Kind,
    Lineage,
    Reference,
    SourceFormat,
    TypedValue,
    UniversalDocument,
    VersionId,
    extract_paths,
    value_sort_key,
)
from .planner import (
    AggregateRequest,
    ConnectionRequest,
    OpKind,
    PlanNode,
    Planner,
    QueryPlan,
    SearchRequest,
    ViewQuery,
    lint,
)
from .query import DrillState, FacetValue, SearchResult, compare_values, facet_order_key
from .stewardship import GroupRole, Steward
from .store import KernelStore


class Engine:
    def __init__(self, config: Optional[ApplianceConfig] = None, data_dir: Optional[str] = None):
        self.config = config or ApplianceConfig()
        self.fabric = Fabric(self.config.cluster, self.config.cost)
        self.ring = self.fabric.ring
        self.store = KernelStore(
            data_dir=data_dir or self.config.data_dir,
            origin=self.config.origin,
            placement=self._placement,
            is_node_up=self.fabric.is_up,
            storage_classes=self.config.storage_classes(),
        )
        self.indexes = IndexManager(self.config.cluster.partitions)
        self.join_index = JoinIndex()
        self.entity_registry = EntityRegistry()
        self.planner = Planner(self)
        self.annotators: dict[str, AnnotatorSpec] = {}
        self.synonyms: dict[str, str] = {}
        self.view_columns: dict[str, dict[str, str]] = {}
        self.annotations_by_base: dict[DocId, list[tuple[DocId, VersionId]]] = {}
        self._annotation_keys: dict[tuple, DocId] = {}
        self._intra_done: set[tuple[DocId, VersionId, str]] = set()
        self.intra_runs: Counter = Counter()
        self.producers: set[str] = {"query_persist", "partition_rebuild"}
        self.fabric.on_data_node_lost = self._data_node_lost
        self.fabric.on_data_node_joined = self._data_node_joined
        self.steward = Steward(
            lambda node_id: self.fabric.nodes[node_id],
            self.fabric.is_up,
            lambda: self.fabric.clock,
        )
        for role, flavor in ((GroupRole.DATA_STORAGE, Flavor.DATA),
                             (GroupRole.GRID_COMPUTE, Flavor.GRID),
                             (GroupRole.CLUSTER_SERVICE, Flavor.CLUSTER)):
            members = {n.node_id for n in self.fabric.nodes.values() if n.flavor is flavor}
            if members:
                self.steward.create_group(role, members)
        if self.config.annotator_file:
            with open(self.config.annotator_file) as fh:
                for spec in discovery.load_annotator_specs(fh.read()):
                    self.register_annotator(spec)

    # -- placement ----------------------------------------------------------

    def _placement(self, doc_id: DocId, storage_class) -> list[int]:
        partition = self.ring.partition_of(doc_id)
        return self._live_targets(partition, storage_class.replication_factor)

    def _live_targets(self, partition: int, factor: int) -> list[int]:
        chain = self.ring.replicas_of(partition, len(self.fabric.nodes))
        live = [n for n in chain if self.fabric.is_up(n)]
        return live[:factor]

    # -- synonyms & paths ---------------------------------------------------

    def register_synonym(self, raw_path: str, canonical: str) -> None:
        self.synonyms[raw_path] = canonical

    def normalize_path(self, path: str) -> str:
        return self.synonyms.get(path, path)

    def path_class(self, canonical: str) -> list[str]:
        members = {canonical}
        members.update(raw for raw, c in self.synonyms.items() if c == canonical)
        return sorted(members)

    def doc_values_at(self, doc: UniversalDocument, canonical: str) -> list[TypedValue]:
        return [
            e.value
            for e in extract_paths(doc)
            if self.normalize_path(e.path) == canonical and e.value is not None
        ]

    # -- planner statistics (PlannerStats) ----------------------------------

    def scan_units(self) -> list[tuple[int, tuple[int, ...]]]:
        by_node: dict[int, list[int]] = {}
        for p in range(self.config.cluster.partitions):
            by_node.setdefault(self.ring.primary_of(p), []).append(p)
        units = []
        for node in sorted(by_node):
            parts = tuple(sorted(by_node[node]))
            units.append((parts[0], parts))
        return units

    def corpus_size(self) -> int:
        return len(self.store.latest)

    def doc_frequency(self, token: str) -> int:
        docs = set()
        for posting in self.indexes.lookup(IndexKey.for_token(token)):
            if self.store.latest.get(posting.doc_id) == posting.version:
                docs.add(posting.doc_id)
        return len(docs)

    def posting_length(self, path: str) -> int:
        total = 0
        for raw in self.path_class(path):
            total += len(self.indexes.lookup(IndexKey.for_path(raw)))
        return total

    def annotation_count(self) -> int:
        return sum(len(v) for v in self.annotations_by_base.values())

    def path_indexed(self, path: str) -> bool:
        return any(self.indexes.has_path(raw) for raw in self.path_class(path))

    def view_exists(self, name: str) -> bool:
        return name in self.view_columns

    def view_join_path(self, view: str, column: str) -> str:
        columns = self.view_columns.get(view, {})
        if column not in columns:
            raise UnknownPath(f"view {view!r} has no column {column!r}")
        return self.normalize_path(columns[column])

    # -- ingest & update ----------------------------------------------------

    def ingest(self, raw: bytes, source_format: SourceFormat) -> tuple[DocId, VersionId]:
        doc_id, version = self.store.ingest(raw, source_format)
        self._after_persist(doc_id, version)
        return doc_id, version

    def update(self, doc_id: DocId, new_root: DocNode) -> VersionId:
        if doc_id not in self.store.latest:
            raise UnknownDoc(f"unknown document {doc_id}")
        partition = self.ring.partition_of(doc_id)
        group = self.fabric.group_for_partition(partition)
        if self.fabric.current_leader(group) is None:
            # Version assignment stalls until the covering group elects a
            # leader (next heartbeat round at the latest).
            self.fabric.run_until(lambda: self.fabric.current_leader(group) is not None)
        version = self.store.update(doc_id, new_root)
        self._submit_index(doc_id, version)
        return version

    def _after_persist(self, doc_id: DocId, version: VersionId) -> None:
        self._submit_index(doc_id, version)
        doc = self.store.get(doc_id, version)
        for spec in self.annotators.values():
            if spec.scope is AnnotatorScope.INTRA and spec.selector.matches(doc):
                self._submit_intra(doc_id, version, spec)

    def _submit_index(self, doc_id: DocId, version: VersionId) -> None:
        partition = self.ring.partition_of(doc_id)

        def fn(fabric: Fabric, task: Task) -> TaskResult:
            doc = self.store.get(doc_id, version)
            task.n_in = len(extract_paths(doc))
            added = self.indexes.index_document(doc, partition)
            return TaskResult(n_out=added)

        self.fabric.submit(Task(
            task_id=self.fabric.next_task_id(), kind="index", category="index",
            priority=Priority.BACKGROUND, flavor=Flavor.DATA, fn=fn, partition=partition,
        ))

    # -- discovery pipeline -------------------------------------------------

    def register_annotator(self, spec: AnnotatorSpec) -> None:
        if spec.name in self.annotators:
            raise DuplicateAnnotator(f"annotator {spec.name!r} already registered")
        self.annotators[spec.name] = spec
        self.producers.add(spec.name)
        if spec.scope is AnnotatorScope.INTRA:
            for doc in list(self.store.latest_docs()):
                if spec.selector.matches(doc):
                    self._submit_intra(doc.doc_id, doc.version, spec)

    def _submit_intra(self, doc_id: DocId, version: VersionId, spec: AnnotatorSpec) -> None:
        key = (doc_id, version, spec.name)
        if key in self._intra_done:
            return
        self._intra_done.add(key)
        partition = self.ring.partition_of(doc_id)

        def fn(fabric: Fabric, task: Task) -> TaskResult:
            doc = self.store.get(doc_id, version)
            task.n_in = len(extract_paths(doc))
            entities = run_intra(doc, spec)
            self.intra_runs[spec.name] += 1
            successors = []
            if entities:
                successors.append(self._make_annotation_persist_task(doc_id, version, spec, entities))
            return TaskResult(n_out=len(entities), successors=successors)

        self.fabric.submit(Task(
            task_id=self.fabric.next_task_id(), kind="intra", category="discovery",
            priority=Priority.BACKGROUND, flavor=Flavor.DATA, fn=fn, partition=partition,
        ))

    def _make_annotation_persist_task(
        self, base_id: DocId, base_version: VersionId, spec: AnnotatorSpec, entities: list[Entity]
    ) -> Task:
        partition = self.ring.partition_of(base_id)

        def fn(fabric: Fabric, task: Task) -> TaskResult:
            task.n_in = len(entities)
            ann_id = self.persist_annotation(base_id, base_version, spec.name, entities)
            if ann_id is None:
                return TaskResult(n_out=0)
            stream = [((e.entity_type, e.text), base_id, base_version) for e in entities]
            return TaskResult(n_out=1, successors=[self._make_inter_task(stream)])

        return Task(
            task_id=self.fabric.next_task_id(), kind="annotation_persist",
            category="discovery", priority=Priority.BACKGROUND,
            flavor=Flavor.CLUSTER, fn=fn, partition=partition,
        )

    def persist_annotation(
        self, base_id: DocId, base_version: VersionId, producer: str, entities: list[Entity]
    ) -> Optional[DocId]:
        """Persist an annotation document, deduplicating by lineage + content."""
        dedup_key = (producer, base_id, base_version, tuple(entities))
        if dedup_key in self._annotation_keys:
            return None
        root = annotation_tree(entities)
        ann_id, ann_version = self.store.persist_derived(
            root,
            Kind.ANNOTATION,
            references=[Reference(base_id, base_version, "annotates")],
            lineage=Lineage(producer, ((base_id, base_version),)),
        )
        self._annotation_keys[dedup_key] = ann_id
        self.annotations_by_base.setdefault(base_id, []).append((ann_id, ann_version))
        self._submit_index(ann_id, ann_version)
        return ann_id

    def _make_inter_task(self, stream: list[tuple[tuple[str, str], DocId, VersionId]]) -> Task:
        def fn(fabric: Fabric, task: Task) -> TaskResult:
            task.n_in = len(stream)
            pairs = self.entity_registry.resolve(stream)
            successors = []
            if pairs:
                successors.append(self._make_join_persist_task(pairs))
            return TaskResult(n_out=len(pairs), successors=successors)

        return Task(
            task_id=self.fabric.next_task_id(), kind="inter", category="discovery",
            priority=Priority.BACKGROUND, flavor=Flavor.GRID, fn=fn,
        )

    def _make_join_persist_task(self, pairs) -> Task:
        def fn(fabric: Fabric, task: Task) -> TaskResult:
            task.n_in = len(pairs)
            added = 0
            for left, right, key in pairs:
                if self.join_index.add(left, right, "references_entity", key) is not None:
                    added += 1
            return TaskResult(n_out=added)

        return Task(
            task_id=self.fabric.next_task_id(), kind="join_persist", category="discovery",
            priority=Priority.BACKGROUND, flavor=Flavor.CLUSTER, fn=fn, partition=0,
        )

    # -- quiesce ------------------------------------------------------------

    def quiesce_index(self) -> IndexEpoch:
        self.fabric.drain({"index"})
        return self.indexes.epoch()

    def quiesce_pipeline(self) -> IndexEpoch:
        self.fabric.drain({"discovery", "index"})
        return self.indexes.epoch()

    def quiesce_repair(self) -> None:
        self._await_failure_detection()
        self.fabric.drain({"repair", "index"})

    def quiesce_all(self) -> None:
        self._await_failure_detection()
        self.fabric.drain({"discovery", "index", "repair"})

    def _await_failure_detection(self) -> None:
        # Repair tasks are only queued once heartbeat detection fires, so a
        # freshly failed node must be suspected before draining means done.
        failed = [
            node_id for node_id, node in self.fabric.nodes.items()
            if node.state is not NodeState.UP
        ]
        if any(node_id not in self.fabric.suspected for node_id in failed):
            self.fabric.run_until(
                lambda: all(node_id in self.fabric.suspected for node_id in failed)
            )

    # -- failure handling & repair ------------------------------------------

    def fail_node(self, node_id: int) -> None:
        self.fabric.fail_node(node_id)

    def join_node(self, flavor: Flavor, capacity: Optional[float] = None) -> int:
        node_id = self.fabric.join_node(flavor, capacity)
        self.steward.add_resource(self.fabric.nodes[node_id])
        return node_id

    def _data_node_lost(self, node_id: int) -> None:
        # Called by the fabric once heartbeat detection suspects the node.
        self.store.drop_replica_node(node_id)
        if node_id in self.ring.ring_order() and len(self.ring.ring_order()) > 1:
            moves = self.ring.remove_node(node_id)
            for partition, _src, _dst in moves:
                self.indexes.drop_partition(partition)
                self._submit_rebuild(partition)
        self.enforce_replication()

    def _data_node_joined(self, node_id: int) -> None:
        self.ring.add_node(node_id)
        self.enforce_replication()

    def _submit_rebuild(self, partition: int) -> None:
        def fn(fabric: Fabric, task: Task) -> TaskResult:
            count = 0
            for doc_id in sorted(self.store.latest):
                if self.ring.partition_of(doc_id) != partition:
                    continue
                for version in range(1, self.store.latest[doc_id] + 1):
                    doc = self.store.get(doc_id, version)
                    self.indexes.index_document(doc, partition)
                    count += 1
            task.n_in = count
            return TaskResult(n_out=count)

        self.fabric.submit(Task(
            task_id=self.fabric.next_task_id(), kind="index_rebuild", category="repair",
            priority=Priority.BACKGROUND, flavor=Flavor.DATA, fn=fn, partition=partition,
        ))

    def enforce_replication(self) -> int:
        """Queue copy/rebuild tasks for every record below its class factor.

        Returns the number of repair tasks enqueued. Replica sets converge to
        exactly the ring targets for each record's storage class.
        """
        tasks = 0
        by_partition: dict[int, list[tuple[DocId, VersionId]]] = {}
        for (doc_id, version) in self.store.holders:
            by_partition.setdefault(self.ring.partition_of(doc_id), []).append((doc_id, version))
        for partition in sorted(by_partition):
            work: list[tuple[DocId, VersionId, list[int]]] = []
            for doc_id, version in sorted(by_partition[partition]):
                doc_kind = self.store.get(doc_id, version).kind \
                    if any(self.fabric.is_up(n) for n in self.store.holders[(doc_id, version)]) else None
                if doc_kind is None:
                    # No live replica: derived data is rebuilt from lineage.
                    self._submit_lineage_rebuild(doc_id, version, partition)
                    tasks += 1
                    continue
                factor = self.store.storage_classes[doc_kind].replication_factor
                targets = self._live_targets(partition, factor)
                holders = [n for n in self.store.holders[(doc_id, version)] if self.fabric.is_up(n)]
                if sorted(holders) != sorted(targets):
                    work.append((doc_id, version, targets))
            if work:
                self._submit_copy(partition, work)
                tasks += 1
            # A lost (empty) index partition that still has documents gets rebuilt.
            if by_partition[partition] and not self.indexes.partitions[partition].indexed:
                self._submit_rebuild(partition)
                tasks += 1
        return tasks

    def _submit_copy(self, partition: int, work: list[tuple[DocId, VersionId, list[int]]]) -> None:
        def fn(fabric: Fabric, task: Task) -> TaskResult:
            copies = 0
            for doc_id, version, targets in work:
                key = (doc_id, version)
                for node in targets:
                    if node not in self.store.holders[key]:
                        self.store.add_replica(doc_id, version, node)
                        copies += 1
                # Trim to exactly the target set (failed holders are gone
                # already; extras left by rebalancing are dropped logically).
                self.store.holders[key] = [n for n in self.store.holders[key] if n in targets]
            task.n_in = len(work)
            return TaskResult(n_out=copies)

        self.fabric.submit(Task(
            task_id=self.fabric.next_task_id(), kind="replica_copy", category="repair",
            priority=Priority.BACKGROUND, flavor=Flavor.DATA, fn=fn, partition=partition,
        ))

    def _submit_lineage_rebuild(self, doc_id: DocId, version: VersionId, partition: int) -> None:
        def fn(fabric: Fabric, task: Task) -> TaskResult:
            frame = self.store.frames[(doc_id, version)]
            from .model import deserialize_document
            doc = deserialize_document(frame)
            if doc.lineage and doc.lineage.producer in self.annotators and doc.kind is Kind.ANNOTATION:
                # Recompute from the base document and verify determinism
                # before restoring a replica.
                spec = self.annotators[doc.lineage.producer]
                base_id, base_version = doc.lineage.inputs[0]
                base = self.store.get(base_id, base_version)
                recomputed = run_intra(base, spec)
                if recomputed != entities_of(doc):
                    raise InvalidRequest(
                        f"annotator {spec.name!r} no longer reproduces ({doc_id}, v{version})"
                    )
            targets = self._live_targets(partition, 1)
            for node in targets:
                self.store.holders[(doc_id, version)] = []
                self.store.add_replica(doc_id, version, node)
            task.n_in = 1
            return TaskResult(n_out=len(targets))

        self.fabric.submit(Task(
            task_id=self.fabric.next_task_id(), kind="lineage_rebuild", category="repair",
            priority=Priority.BACKGROUND, flavor=Flavor.DATA, fn=fn, partition=partition,
        ))

    # -- views ---------------------------------------------------------------

    def register_view(self, name: str, columns: list[tuple[str, str]]) -> None:
        self.store.register_view(name, columns)
        self.view_columns[name] = dict(columns)

    def view_rows(self, name: str, partitions: Optional[tuple[int, ...]] = None) -> list[list]:
        doc_filter = None
        if partitions is not None:
            part_set = set(partitions)
            doc_filter = lambda doc: self.ring.partition_of(doc.doc_id) in part_set
        return self.store.relational_view(name, doc_filter)

    # -- query entry points --------------------------------------------------

    def plan(self, request) -> QueryPlan:
        plan = self.planner.plan(request)
        lint(plan)
        return plan

    def _dispatch(self, plan: QueryPlan) -> tuple[dict[str, Any], list[TraceRecord]]:
        return self.fabric.dispatch(plan, self._execute_op, Priority.INTERACTIVE, "query")

    def search(self, request: SearchRequest) -> SearchResult:
        plan = self.plan(request)
        payloads, _trace = self._dispatch(plan)
        return self._assemble_search(plan, payloads)

    def _assemble_search(self, plan: QueryPlan, payloads: dict[str, Any]) -> SearchResult:
        hits, total = [], 0
        facet_counts: dict[str, list[FacetValue]] = {}
        for nid in plan.outputs:
            node = plan.node(nid)
            payload = payloads[nid]
            if node.op is OpKind.MERGE_TOP_K:
                hits = payload["hits"]
                total = payload["total"]
            elif node.op is OpKind.FACET_COUNT:
                facet_counts = payload["facets"]
        return SearchResult(hits=hits, facet_counts=facet_counts, total=total)

    def drill_down(self, state: DrillState, facet: str, value: TypedValue) -> tuple[DrillState, SearchResult]:
        new_state = state.drill_down(facet, value)
        return new_state, self.search(new_state.effective_request())

    def aggregate(self, state: DrillState | SearchRequest, group_by: str, measure: str, fn: str):
        base = state.effective_request() if isinstance(state, DrillState) else state
        request = AggregateRequest(base, group_by, measure, fn)
        plan = self.plan(request)
        payloads, _ = self._dispatch(plan)
        return payloads[plan.root]["groups"]

    def connection_query(self, a: DocId, b: DocId, max_hops: int = 6):
        if max_hops > self.config.max_connection_hops:
            raise InvalidRequest(
                f"max_hops {max_hops} exceeds the configured cap {self.config.max_connection_hops}"
            )
        for d in (a, b):
            if d not in self.store.latest:
                raise UnknownDoc(f"unknown document {d}")
        request = ConnectionRequest(a, b, max_hops)
        plan = self.plan(request)
        payloads, _ = self._dispatch(plan)
        return payloads[plan.root]["paths"]

    def view_query(self, request: ViewQuery):
        plan = self.plan(request)
        payloads, _ = self._dispatch(plan)
        result = payloads[plan.root]
        return result["rows"]

    # -- operator execution ---------------------------------------------------

    def _latest_docs_in(self, partitions: tuple[int, ...]) -> list[UniversalDocument]:
        part_set = set(partitions)
        return [
            self.store.get(doc_id)
            for doc_id in sorted(self.store.latest)
            if self.ring.partition_of(doc_id) in part_set
        ]

    def _execute_op(self, node: PlanNode, inputs: list[Any]) -> tuple[Any, int, int]:
        op = node.op
        params = node.params
        if op is OpKind.INDEX_SCAN:
            return self._op_index_scan(params)
        if op is OpKind.FETCH:
            return self._op_fetch(params)
        if op is OpKind.FILTER:
            if "selection" in params:
                return self._op_view_filter(params, inputs)
            return self._op_search_filter(params, inputs)
        if op is OpKind.PARTIAL_TOP_K:
            matches = inputs[0]["matches"]
            top = sorted(matches, key=lambda m: (-m[2], m[0]))[: params["k"]]
            return {"top": top, "count": len(matches)}, len(matches), len(top)
        if op is OpKind.MERGE_TOP_K:
            merged = [m for payload in inputs for m in payload["top"]]
            total = sum(payload["count"] for payload in inputs)
            hits = sorted(merged, key=lambda m: (-m[2], m[0]))[: params["k"]]
            return {"hits": hits, "total": total}, len(merged), len(hits)
        if op is OpKind.FACET_COUNT:
            return self._op_facet_count(params, inputs)
        if op is OpKind.GROUP_AGGREGATE:
            return self._op_group_aggregate(params, inputs)
        if op is OpKind.INDEXED_NL_JOIN:
            kind = params["join"]
            if kind == "annotates":
                return self._op_annotation_join(inputs)
            if kind == "edge_expand":
                return self._op_edge_expand(params, inputs)
            return self._op_view_join(params, inputs)
        if op is OpKind.SORT:
            if params.get("order") == "path_lex":
                return self._op_connection_sort(params, inputs)
            return self._op_row_sort(params, inputs)
        if op is OpKind.PERSIST:
            return self._op_persist(params, inputs)
        raise InvalidRequest(f"unknown operator {op}")

    def _op_index_scan(self, params) -> tuple[Any, int, int]:
        partitions = params["partitions"]
        docs: dict[DocId, tuple[VersionId, int]] = {}
        examined = 0
        if params["key"] == "token":
            key = IndexKey.for_token(params["token"])
            for p in partitions:
                for posting in self.indexes.lookup_partition(key, p):
                    examined += 1
                    if self.store.latest.get(posting.doc_id) == posting.version:
                        version, tf = docs.get(posting.doc_id, (posting.version, 0))
                        docs[posting.doc_id] = (posting.version, tf + 1)
        else:
            comparator, target = params["comparator"], params["value"]
            for p in partitions:
                for raw in self.path_class(params["path"]):
                    for value, postings in self.indexes.partitions[p].values_at(raw):
                        examined += len(postings)
                        if compare_values(value, comparator, target):
                            for posting in postings:
                                if self.store.latest.get(posting.doc_id) == posting.version:
                                    docs.setdefault(posting.doc_id, (posting.version, 0))
        return {"docs": docs}, examined, len(docs)

    def _op_search_filter(self, params, inputs) -> tuple[Any, int, int]:
        n_terms = len(params["terms"])
        weights = params["idf"]
        if params.get("match_all"):
            matches = list(inputs[0]["matches"])
            return {"matches": matches}, len(matches), len(matches)
        n_in = sum(len(payload["docs"]) for payload in inputs)
        doc_sets = [set(payload["docs"]) for payload in inputs]
        common = set.intersection(*doc_sets) if doc_sets else set()
        matches = []
        for doc_id in sorted(common):
            score = 0.0
            version = None
            for i, term in enumerate(params["terms"]):
                version, tf = inputs[i]["docs"][doc_id]
                score += tf * weights[term]
            if version is None:
                version = next(iter(inputs))["docs"][doc_id][0] if inputs else self.store.latest[doc_id]
            matches.append((doc_id, version, score))
        return {"matches": matches}, n_in, len(matches)

    def _op_view_filter(self, params, inputs) -> tuple[Any, int, int]:
        rows = inputs[0]["rows"]
        columns = inputs[0]["columns"]
        selection = params["selection"]
        col_index = {c: i for i, c in enumerate(columns)}
        out = []
        for row in rows:
            keep = True
            for col, comparator, value in selection:
                if col not in col_index:
                    raise UnknownPath(f"view {params['view']!r} has no column {col!r}")
                cell = row[col_index[col]]
                if cell is None or not compare_values(cell, comparator, value):
                    keep = False
                    break
            if keep:
                out.append(row)
        return {"rows": out, "columns": columns}, len(rows), len(out)

    def _op_facet_count(self, params, inputs) -> tuple[Any, int, int]:
        matches = [m for payload in inputs for m in payload["matches"]]
        facets: dict[str, list[FacetValue]] = {}
        emitted = 0
        for facet in params["facets"]:
            counter: dict[tuple, tuple[TypedValue, int]] = {}
            for doc_id, version, _score in matches:
                doc = self.store.get(doc_id, version)
                distinct = {}
                for value in self.doc_values_at(doc, facet):
                    distinct[value_sort_key(value)] = value
                for vkey, value in distinct.items():
                    display, count = counter.get(vkey, (value, 0))
                    counter[vkey] = (display, count + 1)
            values = [FacetValue(display, count) for display, count in counter.values()]
            values.sort(key=facet_order_key)
            facets[facet] = values[: params["top"]]
            emitted += len(facets[facet])
        return {"facets": facets}, len(matches), emitted

    def _op_group_aggregate(self, params, inputs) -> tuple[Any, int, int]:
        if inputs and isinstance(inputs[0], dict) and "joined" in inputs[0]:
            joined = inputs[0]["joined"]
            counter: Counter = Counter(entity_type for _d, _a, entity_type in joined)
            groups = sorted(counter.items())
            return {"groups": groups}, len(joined), len(groups)
        fn = params["fn"]
        group_by, measure = params["group_by"], params["measure"]
        matches = [m for payload in inputs for m in payload["matches"]]
        buckets: dict[tuple, tuple[TypedValue, list]] = {}
        for doc_id, version, _score in matches:
            doc = self.store.get(doc_id, version)
            group_values = {}
            for value in self.doc_values_at(doc, group_by):
                group_values[value_sort_key(value)] = value
            if not group_values:
                continue
            measures = self.doc_values_at(doc, measure)
            if not measures:
                continue
            m = measures[0]
            if fn != "count":
                if isinstance(m, bool) or not isinstance(m, (int, float)):
                    raise InvalidRequest(
                        f"measure {measure!r} is not numeric in document {doc_id}"
                    )
            for vkey, value in group_values.items():
                display, items = buckets.setdefault(vkey, (value, []))
                items.append(m)
        groups = []
        for vkey in sorted(buckets):
            display, items = buckets[vkey]
            if fn == "count":
                agg = len(items)
            elif fn == "sum":
                agg = sum(items)
            elif fn == "min":
                agg = min(items)
            elif fn == "max":
                agg = max(items)
            else:
                agg = sum(items) / len(items)
            groups.append((display, agg))
        return {"groups": groups}, len(matches), len(groups)

    def _op_annotation_join(self, inputs) -> tuple[Any, int, int]:
        hits = inputs[0]["hits"]
        joined = []
        for doc_id, version, _score in hits:
            for ann_id, ann_version in self.annotations_by_base.get(doc_id, []):
                try:
                    ann = self.store.get(ann_id, ann_version)
                except Exception:
                    continue
                for entity in entities_of(ann):
                    joined.append((doc_id, ann_id, entity.entity_type))
        return {"joined": joined}, len(hits), len(joined)

    # -- connection search ----------------------------------------------------

    def _edge_set(self) -> dict[DocId, list[tuple[DocId, str]]]:
        adjacency: dict[DocId, dict[DocId, str]] = {}

        def add(u: DocId, v: DocId, relation: str) -> None:
            for a, b in ((u, v), (v, u)):
                current = adjacency.setdefault(a, {}).get(b)
                if current is None or relation < current:
                    adjacency[a][b] = relation

        for doc in self.store.latest_docs():
            for ref in doc.references:
                add(doc.doc_id, ref.target_doc, ref.relation)
        for entry in self.join_index.all_entries():
            add(entry.left[0], entry.right[0], entry.relation)
        return {
            u: sorted(neighbors.items())
            for u, neighbors in adjacency.items()
        }

    def _op_edge_expand(self, params, inputs) -> tuple[Any, int, int]:
        a = DocId.parse(params["a"])
        b = DocId.parse(params["b"])
        if params["hop"] == 1:
            edges = [e for payload in inputs for e in payload["edges"]]
            adjacency: dict[DocId, dict[DocId, str]] = {}
            for u, v, relation in edges:
                for x, y in ((u, v), (v, u)):
                    current = adjacency.setdefault(x, {}).get(y)
                    if current is None or relation < current:
                        adjacency[x][y] = relation
            for entry in self.join_index.all_entries():
                for x, y in ((entry.left[0], entry.right[0]), (entry.right[0], entry.left[0])):
                    current = adjacency.setdefault(x, {}).get(y)
                    if current is None or entry.relation < current:
                        adjacency[x][y] = entry.relation
            state = {
                "adj": {u: sorted(nbrs.items()) for u, nbrs in adjacency.items()},
                "paths": {a: [[]]},  # node -> list of step lists
                "visited": {a},
                "frontier": [a],
                "found": [],
            }
            n_in = len(edges)
        else:
            state = inputs[0]
            n_in = len(state["frontier"])
        if state["found"]:
            return state, n_in, len(state["found"])
        adjacency = state["adj"]
        next_paths: dict[DocId, list[list]] = {}
        for node in sorted(state["frontier"]):
            for path in state["paths"].get(node, []):
                for neighbor, relation in adjacency.get(node, []):
                    if neighbor in state["visited"]:
                        continue
                    candidate = path + [(neighbor, relation)]
                    bucket = next_paths.setdefault(neighbor, [])
                    bucket.append(candidate)
        # Keep only the 10 lexicographically smallest paths per node.
        for neighbor, bucket in next_paths.items():
            bucket.sort(key=lambda p: [(step[0], step[1]) for step in p])
            del bucket[10:]
        new_state = {
            "adj": adjacency,
            "paths": next_paths,
            "visited": state["visited"] | set(next_paths),
            "frontier": sorted(next_paths),
            "found": list(next_paths.get(b, [])),
        }
        n_out = sum(len(v) for v in next_paths.values())
        return new_state, n_in, n_out

    def _op_connection_sort(self, params, inputs) -> tuple[Any, int, int]:
        state = inputs[0]
        found = list(state.get("found", []))
        found.sort(key=lambda p: [(step[0], step[1]) for step in p])
        found = found[: params["limit"]]
        return {"paths": found}, len(state.get("found", [])), len(found)

    def _op_fetch(self, params) -> tuple[Any, int, int]:
        if params["what"] == "docs":
            docs = self._latest_docs_in(params["partitions"])
            matches = [(doc.doc_id, doc.version, 0.0) for doc in docs]
            return {"matches": matches}, len(docs), len(matches)
        if params["what"] == "edges":
            docs = self._latest_docs_in(params["partitions"])
            edges = []
            for doc in docs:
                for ref in doc.references:
                    edges.append((doc.doc_id, ref.target_doc, ref.relation))
            return {"edges": edges}, len(docs), len(edges)
        view = params["view"]
        rows = self.view_rows(view, params["partitions"])
        columns = [c for c, _p in self.store.views[view].columns]
        return {"rows": rows, "columns": columns}, len(rows), len(rows)

    def _op_view_join(self, params, inputs) -> tuple[Any, int, int]:
        left_rows = [r for payload in inputs for r in payload["rows"]]
        left_columns = inputs[0]["columns"]
        right_view = params["right_view"]
        right_rows = self.view_rows(right_view)
        right_columns = [c for c, _p in self.store.views[right_view].columns]
        li = {c: i for i, c in enumerate(left_columns)}
        ri = {c: i for i, c in enumerate(right_columns)}
        if params["left_col"] not in li:
            raise UnknownPath(f"view {params['left_view']!r} has no column {params['left_col']!r}")
        if params["right_col"] not in ri:
            raise UnknownPath(f"view {right_view!r} has no column {params['right_col']!r}")
        lcol, rcol = li[params["left_col"]], ri[params["right_col"]]
        probe: dict[tuple, list] = {}
        for row in right_rows:
            if row[rcol] is None:
                continue
            probe.setdefault(value_sort_key(row[rcol]), []).append(row)
        out = []
        for row in left_rows:
            if row[lcol] is None:
                continue
            for match in probe.get(value_sort_key(row[lcol]), []):
                out.append(list(row) + list(match))
        columns = list(left_columns) + [f"{right_view}.{c}" for c in right_columns]
        return {"rows": out, "columns": columns}, len(left_rows) + len(right_rows), len(out)

    def _op_row_sort(self, params, inputs) -> tuple[Any, int, int]:
        rows = [r for payload in inputs for r in payload["rows"]]
        columns = inputs[0]["columns"]
        projection = params.get("projection")
        if projection:
            idx = []
            for col in projection:
                if col not in columns:
                    raise UnknownPath(f"no column {col!r} to project")
                idx.append(columns.index(col))
            rows = [[row[i] for i in idx] for row in rows]
            columns = list(projection)

        def row_key(row):
            return [(0, None) if cell is None else (1,) + value_sort_key(cell) for cell in row]

        rows.sort(key=row_key)
        return {"rows": rows, "columns": columns}, len(rows), len(rows)

    def _op_persist(self, params, inputs) -> tuple[Any, int, int]:
        summary = repr(inputs[0])
        root = DocNode("query_result", None, [
            DocNode("name", params["name"]),
            DocNode("payload", summary),
        ])
        doc_id, version = self.store.persist_derived(
            root, Kind.DERIVED, references=[], lineage=Lineage("query_persist", ()),
        )
        self._submit_index(doc_id, version)
        return {"persisted": str(doc_id), "result": inputs[0]}, 1, 1
