"""Partition placement over data nodes.

Documents hash onto a fixed set of partitions; partitions are assigned to
data nodes on a hash-ordered ring with a balance cap, so that per-node
partition counts never differ by more than one and membership changes move
only the minimal set of partitions. Replica targets for a partition are the
next distinct nodes in ring order after its primary.
"""
from __future__ import annotations

from .model import DocId, fnv1a64


def _node_point(node_id: int) -> int:
    return fnv1a64(b"node:%d" % node_id)


class PartitionRing:
    def __init__(self, partitions: int, data_nodes: list[int]):
        if partitions < 1:
            raise ValueError("need at least one partition")
        if not data_nodes:
            raise ValueError("need at least one data node")
        self.partitions = partitions
        self._nodes: list[int] = []
        self.assignment: dict[int, int] = {}  # partition -> primary node
        for node_id in sorted(data_nodes, key=lambda n: (_node_point(n), n)):
            self._nodes.append(node_id)
        self._assign_initial()

    # -- membership ---------------------------------------------------------

    def ring_order(self) -> list[int]:
        """Live nodes in ring (hash-point) order."""
        return list(self._nodes)

    def partition_of(self, doc_id: DocId) -> int:
        key = b"%d:%d" % (doc_id.origin, doc_id.sequence)
        return fnv1a64(key) % self.partitions

    def primary_of(self, partition: int) -> int:
        return self.assignment[partition]

    def replicas_of(self, partition: int, factor: int) -> list[int]:
        """Primary plus the next distinct ring nodes, up to factor targets."""
        primary = self.assignment[partition]
        order = self._nodes
        start = order.index(primary)
        out = []
        for i in range(len(order)):
            node = order[(start + i) % len(order)]
            if node not in out:
                out.append(node)
            if len(out) == factor:
                break
        return out

    def _assign_initial(self) -> None:
        # Walk the ring clockwise from each partition's hash point, taking the
        # first node still under the balance cap.
        n = len(self._nodes)
        cap_hi = -(-self.partitions // n)  # ceil
        counts = {node: 0 for node in self._nodes}
        points = [_node_point(node) for node in self._nodes]
        for p in range(self.partitions):
            h = fnv1a64(b"partition:%d" % p)
            start = 0
            for i, pt in enumerate(points):
                if pt >= h:
                    start = i
                    break
            for i in range(n):
                node = self._nodes[(start + i) % n]
                if counts[node] < cap_hi:
                    self.assignment[p] = node
                    counts[node] += 1
                    break
        self._rebalance()

    def _rebalance(self) -> list[tuple[int, int, int]]:
        """Move the minimal partition set so counts differ by <= 1.

        Returns moves as (partition, from_node, to_node).
        """
        n = len(self._nodes)
        counts = {node: 0 for node in self._nodes}
        for node in self.assignment.values():
            counts[node] += 1
        lo, hi = self.partitions // n, -(-self.partitions // n)
        moves: list[tuple[int, int, int]] = []
        # Donors release their highest-numbered partitions; receivers are
        # filled in ring order, under-target first.
        donors = sorted(
            (node for node in self._nodes if counts[node] > hi),
            key=lambda nd: (-counts[nd], nd),
        )
        spare: list[tuple[int, int]] = []  # (partition, from_node)
        for node in donors:
            owned = sorted((p for p, nd in self.assignment.items() if nd == node), reverse=True)
            while counts[node] > hi:
                p = owned.pop(0)
                spare.append((p, node))
                counts[node] -= 1
        receivers = [node for node in self._nodes if counts[node] < lo]
        for node in receivers:
            while counts[node] < lo and spare:
                p, src = spare.pop(0)
                self.assignment[p] = node
                counts[node] += 1
                moves.append((p, src, node))
        # Settle the remainder: some nodes at hi, some at lo is fine; any node
        # still above hi or below lo trades with its counterpart.
        while True:
            over = [nd for nd in self._nodes if counts[nd] > hi]
            under = [nd for nd in self._nodes if counts[nd] < lo]
            if not over and not under and not spare:
                break
            if spare and under:
                p, src = spare.pop(0)
                dst = under[0]
                self.assignment[p] = dst
                counts[dst] += 1
                moves.append((p, src, dst))
                continue
            if over or under:
                # Some node above hi, or a node below lo with no spare: move
                # one partition from the fullest node to the emptiest.
                src = max((nd for nd in self._nodes if counts[nd] > lo),
                          key=lambda nd: (counts[nd], -nd))
                dst = min((nd for nd in self._nodes if counts[nd] < hi),
                          key=lambda nd: (counts[nd], nd))
                p = max(p for p, nd in self.assignment.items() if nd == src)
                self.assignment[p] = dst
                counts[src] -= 1
                counts[dst] += 1
                moves.append((p, src, dst))
                continue
            if spare:
                dst = min(self._nodes, key=lambda nd: (counts[nd], nd))
                p, src = spare.pop(0)
                self.assignment[p] = dst
                counts[dst] += 1
                moves.append((p, src, dst))
        return moves

    def add_node(self, node_id: int) -> list[tuple[int, int, int]]:
        """Join a data node; returns the (minimal) partition moves made."""
        if node_id in self._nodes:
            raise ValueError(f"node {node_id} already on the ring")
        point = _node_point(node_id)
        idx = 0
        while idx < len(self._nodes) and (_node_point(self._nodes[idx]), self._nodes[idx]) < (point, node_id):
            idx += 1
        self._nodes.insert(idx, node_id)
        return self._rebalance()

    def remove_node(self, node_id: int) -> list[tuple[int, int, int]]:
        """Remove a node; its partitions are redistributed to keep balance."""
        if node_id not in self._nodes:
            raise ValueError(f"node {node_id} not on the ring")
        if len(self._nodes) == 1:
            raise ValueError("cannot remove the last data node")
        idx = self._nodes.index(node_id)
        self._nodes.pop(idx)
        moves = []
        counts = {node: 0 for node in self._nodes}
        for node in self.assignment.values():
            if node in counts:
                counts[node] += 1
        orphans = sorted(p for p, nd in self.assignment.items() if nd == node_id)
        for p in orphans:
            dst = min(self._nodes, key=lambda nd: (counts[nd], nd))
            self.assignment[p] = dst
            counts[dst] += 1
            moves.append((p, node_id, dst))
        return moves

    def counts(self) -> dict[int, int]:
        out = {node: 0 for node in self._nodes}
        for node in self.assignment.values():
            out[node] += 1
        return out
