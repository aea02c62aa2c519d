"""Deterministic discrete-event simulation of the three-flavor cluster.

All nodes are simulated actors in one process with a virtual clock measured
in ticks. The simulator is the single mutator of simulated state: operator
execution, background pipeline work, heartbeats, membership changes, and
repair all flow through one event heap ordered by (time, sequence), so a
given (config, seed, workload) reproduces every trace byte.

Scheduling is strict-priority with aging: interactive before background,
except a background task older than aging_threshold ticks is promoted.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .errors import InvalidConfig, SchedulingError
from .planner import Flavor, OpKind, PlanNode, QueryPlan
from .ring import PartitionRing


class NodeState(Enum):
    UP = "up"
    FAILED = "failed"
    LEAVING = "leaving"


class Priority(Enum):
    INTERACTIVE = 0
    BACKGROUND = 1


@dataclass
class NodeDescriptor:
    node_id: int
    flavor: Flavor
    compute_capacity: float = 10.0
    io_bandwidth: float = 1024.0  # bytes/tick, data nodes only
    storage_capacity: int = 1 << 30  # bytes, data nodes only
    state: NodeState = NodeState.UP
    capability_tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.compute_capacity <= 0:
            raise InvalidConfig("compute capacity must be > 0")


@dataclass
class ConsistencyGroup:
    group_id: int
    members: list[int]
    leader: Optional[int]
    partitions: set[int]


@dataclass
class CostModel:
    alpha: float = 1.0  # work-units per input tuple
    beta: float = 1.0  # work-units per output tuple
    gamma: float = 0.01  # ticks per byte between nodes
    bytes_per_tuple: int = 64
    base_work: float = 1.0  # fixed work per task

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma, self.base_work) <= 0 or self.bytes_per_tuple <= 0:
            raise InvalidConfig("cost model constants must be > 0")


@dataclass
class ClusterConfig:
    data_nodes: int = 4
    grid_nodes: int = 2
    cluster_nodes: int = 3
    partitions: int = 32
    group_size: int = 3
    data_capacity: float = 10.0
    grid_capacity: float = 10.0
    cluster_capacity: float = 10.0
    io_bandwidth: float = 1024.0
    storage_capacity: int = 1 << 30
    heartbeat_period: int = 10
    missed_heartbeats: int = 3
    aging_threshold: int = 1000

    def __post_init__(self) -> None:
        if self.data_nodes < 1:
            raise InvalidConfig("a cluster needs at least one data node")
        if self.cluster_nodes < 1:
            raise InvalidConfig("a cluster needs at least one cluster node")
        if self.partitions < 1 or self.group_size < 1:
            raise InvalidConfig("partitions and group size must be >= 1")


@dataclass
class Task:
    task_id: int
    kind: str
    category: str  # index | discovery | query | repair | admin
    priority: Priority
    flavor: Flavor
    fn: Callable[["Fabric", "Task"], "TaskResult"]
    partition: Optional[int] = None
    n_in: int = 0
    bytes_in: int = 0
    enqueued_at: int = 0
    node: Optional[int] = None
    fallback: bool = False
    plan_op: Optional[str] = None
    query_id: Optional[int] = None
    payload: Any = None


@dataclass
class TaskResult:
    n_out: int = 0
    payload: Any = None
    successors: list[Task] = field(default_factory=list)
    on_complete: Optional[Callable[[], None]] = None


@dataclass
class TraceRecord:
    task_id: int
    kind: str
    plan_op: Optional[str]
    node: int
    node_flavor: str
    tagged_flavor: str
    fallback: bool
    priority: str
    category: str
    partition: Optional[int]
    enqueued: int
    start: int
    end: int
    n_in: int
    n_out: int
    bytes_in: int
    bytes_out: int
    work: float
    query_id: Optional[int]

    def line(self) -> str:
        return (
            f"{self.task_id:6d} {self.kind:16s} {self.plan_op or '-':14s} "
            f"{self.node:4d} {self.node_flavor:7s} {self.tagged_flavor:7s} "
            f"{'F' if self.fallback else '.'} {self.priority:11s} {self.category:9s} "
            f"{self.partition if self.partition is not None else -1:4d} "
            f"{self.enqueued:8d} {self.start:8d} {self.end:8d} {self.n_in:6d} {self.n_out:6d} "
            f"{self.bytes_in:8d} {self.bytes_out:8d} {self.work:10.2f} "
            f"{self.query_id if self.query_id is not None else -1:5d}"
        )


TRACE_HEADER = (
    "taskid kind             op             node flavor  tagged  f priority    category  "
    "part enqueued    start      end    n_in  n_out bytes_in bytes_out       work query"
)


class Fabric:
    def __init__(self, config: ClusterConfig, cost: Optional[CostModel] = None):
        self.config = config
        self.cost = cost or CostModel()
        self.clock = 0
        self._seq = 0
        self._task_seq = 0
        self._query_seq = 0
        self._events: list[tuple[int, int, str, Any]] = []
        self.nodes: dict[int, NodeDescriptor] = {}
        self.trace: list[TraceRecord] = []
        self.interactive_latencies: list[int] = []
        self._queues: dict[int, dict[Priority, list[Task]]] = {}
        self._busy: dict[int, bool] = {}
        self._grid_load: dict[int, float] = {}
        self.suspected: set[int] = set()
        self._outstanding: dict[str, int] = {}
        self.last_heartbeat: dict[int, int] = {}
        self.leader_changes: list[tuple[int, int, Optional[int], Optional[int]]] = []
        # Engine hooks, called when a failure is detected / a node joins.
        self.on_data_node_lost: Optional[Callable[[int], None]] = None
        self.on_data_node_joined: Optional[Callable[[int], None]] = None

        next_id = 1
        for _ in range(config.data_nodes):
            self._add_node(NodeDescriptor(next_id, Flavor.DATA, config.data_capacity,
                                          config.io_bandwidth, config.storage_capacity))
            next_id += 1
        for _ in range(config.grid_nodes):
            self._add_node(NodeDescriptor(next_id, Flavor.GRID, config.grid_capacity))
            next_id += 1
        for _ in range(config.cluster_nodes):
            self._add_node(NodeDescriptor(next_id, Flavor.CLUSTER, config.cluster_capacity))
            next_id += 1

        self.ring = PartitionRing(config.partitions, self.data_node_ids())
        self.groups = self._build_groups()
        self._schedule(self.clock + config.heartbeat_period, "heartbeat", None)

    # -- topology -----------------------------------------------------------

    def _add_node(self, descriptor: NodeDescriptor) -> None:
        self.nodes[descriptor.node_id] = descriptor
        self._queues[descriptor.node_id] = {Priority.INTERACTIVE: [], Priority.BACKGROUND: []}
        self._busy[descriptor.node_id] = False
        self.last_heartbeat[descriptor.node_id] = 0
        if descriptor.flavor is Flavor.GRID:
            self._grid_load[descriptor.node_id] = 0.0

    def data_node_ids(self) -> list[int]:
        return [n.node_id for n in self.nodes.values() if n.flavor is Flavor.DATA]

    def live_nodes(self, flavor: Flavor) -> list[int]:
        return sorted(
            n.node_id for n in self.nodes.values()
            if n.flavor is flavor and n.state is NodeState.UP
        )

    def is_up(self, node_id: int) -> bool:
        node = self.nodes.get(node_id)
        return node is not None and node.state is NodeState.UP

    def _build_groups(self) -> list[ConsistencyGroup]:
        cluster_ids = sorted(n.node_id for n in self.nodes.values() if n.flavor is Flavor.CLUSTER)
        groups = []
        for i in range(0, len(cluster_ids), self.config.group_size):
            members = cluster_ids[i : i + self.config.group_size]
            groups.append(ConsistencyGroup(len(groups), members, min(members), set()))
        for p in range(self.config.partitions):
            groups[p % len(groups)].partitions.add(p)
        return groups

    def group_for_partition(self, partition: int) -> ConsistencyGroup:
        for group in self.groups:
            if partition in group.partitions:
                return group
        raise SchedulingError(f"partition {partition} is covered by no consistency group")

    # -- event plumbing -----------------------------------------------------

    def _schedule(self, time: int, kind: str, payload: Any) -> None:
        self._seq += 1
        heapq.heappush(self._events, (time, self._seq, kind, payload))

    def next_task_id(self) -> int:
        self._task_seq += 1
        return self._task_seq

    def submit(self, task: Task, delay: int = 0, recount: bool = True) -> None:
        if recount:
            self._outstanding[task.category] = self._outstanding.get(task.category, 0) + 1
        task.enqueued_at = self.clock + delay
        self._schedule(self.clock + delay, "task_ready", task)

    # -- placement ----------------------------------------------------------

    def place(self, task: Task) -> int:
        if task.flavor is Flavor.DATA:
            return self._place_data(task)
        if task.flavor is Flavor.GRID:
            grid = self.live_nodes(Flavor.GRID)
            if grid:
                chosen = min(grid, key=lambda n: (self._grid_load[n], n))
                self._grid_load[chosen] += self.cost.alpha * task.n_in + self.cost.base_work
                return chosen
            task.fallback = True
            return self._place_data(task)
        # Cluster work routes through the covering group's leader.
        group = self.group_for_partition(task.partition or 0)
        leader = self.current_leader(group)
        if leader is not None:
            return leader
        task.fallback = True
        return self._place_data(task)

    def _place_data(self, task: Task) -> int:
        live = self.live_nodes(Flavor.DATA)
        if not live:
            raise SchedulingError("no live data node available")
        if task.partition is None:
            return min(live)
        for node in self.ring.replicas_of(task.partition, len(self.nodes)):
            if self.is_up(node):
                return node
        raise SchedulingError(f"no live node serves partition {task.partition}")

    def current_leader(self, group: ConsistencyGroup) -> Optional[int]:
        if group.leader is not None and self.is_up(group.leader):
            return group.leader
        return None

    # -- scheduling ---------------------------------------------------------

    def tick_scheduler(self, node_id: int, eligible: Optional[set[str]] = None) -> Optional[Task]:
        """Pick the next task for a node: interactive first, aged background wins."""
        queues = self._queues[node_id]

        def ok(task: Task) -> bool:
            return eligible is None or task.category in eligible

        background = [t for t in queues[Priority.BACKGROUND] if ok(t)]
        interactive = [t for t in queues[Priority.INTERACTIVE] if ok(t)]
        aged = [t for t in background if self.clock - t.enqueued_at > self.config.aging_threshold]
        chosen: Optional[Task] = None
        if aged:
            chosen = aged[0]
        elif interactive:
            chosen = interactive[0]
        elif background:
            chosen = background[0]
        if chosen is not None:
            queues[chosen.priority].remove(chosen)
        return chosen

    def _maybe_start(self, node_id: int, eligible: Optional[set[str]]) -> None:
        if self._busy[node_id] or not self.is_up(node_id):
            return
        task = self.tick_scheduler(node_id, eligible)
        if task is None:
            return
        self._busy[node_id] = True
        self._execute(node_id, task)

    def _execute(self, node_id: int, task: Task) -> None:
        node = self.nodes[node_id]
        start = self.clock
        result = task.fn(self, task)
        work = self.cost.base_work + self.cost.alpha * task.n_in + self.cost.beta * result.n_out
        duration = max(1, math.ceil(work / node.compute_capacity))
        end = start + duration
        bytes_out = result.n_out * self.cost.bytes_per_tuple
        self.trace.append(
            TraceRecord(
                task.task_id, task.kind, task.plan_op, node_id, node.flavor.value,
                task.flavor.value, task.fallback, task.priority.name.lower(),
                task.category, task.partition, task.enqueued_at, start, end,
                task.n_in, result.n_out, task.bytes_in, bytes_out, work, task.query_id,
            )
        )
        task.payload = result.payload
        self._schedule(end, "node_free", node_id)
        self._schedule(end, "task_done", (task, result, node_id, bytes_out))

    # -- heartbeats & membership -------------------------------------------

    def _heartbeat(self) -> None:
        for node in self.nodes.values():
            if node.state is NodeState.UP:
                self.last_heartbeat[node.node_id] = self.clock
        period = self.config.heartbeat_period
        limit = self.config.missed_heartbeats * period
        for node in self.nodes.values():
            nid = node.node_id
            if nid in self.suspected:
                continue
            if self.clock - self.last_heartbeat[nid] >= limit:
                self.suspected.add(nid)
                self._on_suspected(nid)
        # Leader liveness is checked every round: a single missed heartbeat
        # from the leader triggers takeover, so version assignment resumes
        # within one heartbeat round of a leader crash.
        for group in self.groups:
            if group.leader is None or not self.is_up(group.leader):
                survivors = [m for m in group.members if self.is_up(m)]
                new_leader = min(survivors) if survivors else None
                if new_leader != group.leader:
                    self.leader_changes.append((self.clock, group.group_id, group.leader, new_leader))
                    group.leader = new_leader
        self._schedule(self.clock + period, "heartbeat", None)

    def _on_suspected(self, node_id: int) -> None:
        node = self.nodes[node_id]
        if node.flavor is Flavor.DATA and self.on_data_node_lost is not None:
            self.on_data_node_lost(node_id)

    def fail_node(self, node_id: int) -> None:
        if node_id not in self.nodes:
            raise SchedulingError(f"unknown node {node_id}")
        node = self.nodes[node_id]
        node.state = NodeState.FAILED
        self._busy[node_id] = False
        # Queued work on a failed node is re-routed; the simulator is
        # omniscient so re-routing happens immediately, while detection-driven
        # reactions (repair, ring failover) wait for missed heartbeats.
        pending = self._queues[node_id][Priority.INTERACTIVE] + self._queues[node_id][Priority.BACKGROUND]
        self._queues[node_id] = {Priority.INTERACTIVE: [], Priority.BACKGROUND: []}
        for task in pending:
            task.node = None
            self.submit(task, recount=False)

    def join_node(self, flavor: Flavor, capacity: Optional[float] = None) -> int:
        node_id = max(self.nodes) + 1
        caps = {
            Flavor.DATA: self.config.data_capacity,
            Flavor.GRID: self.config.grid_capacity,
            Flavor.CLUSTER: self.config.cluster_capacity,
        }
        descriptor = NodeDescriptor(node_id, flavor, capacity or caps[flavor],
                                    self.config.io_bandwidth, self.config.storage_capacity)
        self._add_node(descriptor)
        self.last_heartbeat[node_id] = self.clock
        if flavor is Flavor.DATA:
            if self.on_data_node_joined is not None:
                self.on_data_node_joined(node_id)
        elif flavor is Flavor.CLUSTER:
            # Joins the smallest group (ties by id); becomes leader only if
            # the group has none.
            group = min(self.groups, key=lambda g: (len([m for m in g.members if self.is_up(m)]), g.group_id))
            group.members.append(node_id)
            if group.leader is None:
                group.leader = node_id
                self.leader_changes.append((self.clock, group.group_id, None, node_id))
        return node_id

    # -- main loop ----------------------------------------------------------

    def outstanding(self, categories: Optional[set[str]] = None) -> int:
        if categories is None:
            return sum(self._outstanding.values())
        return sum(self._outstanding.get(c, 0) for c in categories)

    def run_until(
        self,
        done: Callable[[], bool],
        eligible: Optional[set[str]] = None,
        max_events: int = 10_000_000,
    ) -> None:
        """Process events in (time, seq) order until the predicate holds."""
        for _ in range(max_events):
            if done():
                return
            if not self._events:
                raise SchedulingError("event heap drained before completion")
            time, _, kind, payload = heapq.heappop(self._events)
            self.clock = max(self.clock, time)
            if kind == "heartbeat":
                self._heartbeat()
            elif kind == "task_ready":
                task: Task = payload
                if task.node is None or not self.is_up(task.node):
                    task.node = self.place(task)
                self._queues[task.node][task.priority].append(task)
                self._maybe_start(task.node, eligible)
            elif kind == "node_free":
                self._busy[payload] = False
                self._maybe_start(payload, eligible)
            elif kind == "task_done":
                task, result, node_id, bytes_out = payload
                self._outstanding[task.category] = self._outstanding.get(task.category, 1) - 1
                for successor in result.successors:
                    if successor.node is None:
                        successor.node = self.place(successor)
                    delay = 0
                    if successor.node != node_id:
                        delay = math.ceil(self.cost.gamma * bytes_out)
                    self.submit(successor, delay)
                if result.on_complete is not None:
                    result.on_complete()
            elif kind == "callback":
                payload()
        raise SchedulingError("event budget exhausted")

    def drain(self, categories: set[str]) -> None:
        """Run background work until no task of the given categories remains."""
        for node_id in list(self._queues):
            self._maybe_start(node_id, categories)
        self.run_until(lambda: self.outstanding(categories) == 0, eligible=categories)

    # -- plan dispatch ------------------------------------------------------

    def dispatch(
        self,
        plan: QueryPlan,
        executor: Callable[[PlanNode, list[Any]], tuple[Any, int, int]],
        priority: Priority = Priority.INTERACTIVE,
        category: str = "query",
    ) -> tuple[dict[str, Any], list[TraceRecord]]:
        """Execute a linted plan over the simulated cluster.

        The executor callback performs the real operator computation and
        returns (payload, n_in, n_out); the fabric decides placement, cost,
        and ordering. Returns the per-node payloads and the trace slice for
        this query.
        """
        self._query_seq += 1
        query_id = self._query_seq
        trace_start = len(self.trace)
        submit_time = self.clock

        by_id = {n.node_id: n for n in plan.nodes}
        dependents: dict[str, list[str]] = {nid: [] for nid in by_id}
        missing: dict[str, set[str]] = {nid: set(n.inputs) for nid, n in by_id.items()}
        for nid, n in by_id.items():
            for i in n.inputs:
                dependents[i].append(nid)
        payloads: dict[str, Any] = {}
        # The plan is done when the root and every result-bearing output
        # node have completed (facet branches are siblings of the root).
        wanted = set(plan.outputs) | {plan.root}
        completed: set[str] = set()

        def make_fn(plan_node: PlanNode):
            def fn(fabric: Fabric, task: Task) -> TaskResult:
                inputs = [payloads[i] for i in plan_node.inputs]
                payload, n_in, n_out = executor(plan_node, inputs)
                task.n_in = n_in
                payloads[plan_node.node_id] = payload
                successors = []
                for dep in dependents[plan_node.node_id]:
                    missing[dep].discard(plan_node.node_id)
                    if not missing[dep]:
                        successors.append(make_task(by_id[dep]))
                on_complete = None
                if plan_node.node_id in wanted:
                    def on_complete() -> None:
                        completed.add(plan_node.node_id)
                return TaskResult(n_out=n_out, payload=payload, successors=successors,
                                  on_complete=on_complete)
            return fn

        def make_task(plan_node: PlanNode) -> Task:
            return Task(
                task_id=self.next_task_id(),
                kind="operator",
                category=category,
                priority=priority,
                flavor=plan_node.flavor,
                fn=make_fn(plan_node),
                partition=plan_node.params.get("partition"),
                plan_op=plan_node.op.value,
                query_id=query_id,
            )

        for nid, n in by_id.items():
            if not n.inputs:
                self.submit(make_task(n))
        self.run_until(lambda: wanted <= completed)
        if priority is Priority.INTERACTIVE:
            self.interactive_latencies.append(self.clock - submit_time)
        return payloads, self.trace[trace_start:]
