"""Hierarchical resource groups and the broker protocol.

Each group of same-flavor nodes declares a service level; groups report
surplus or deficit autonomously and a single root broker matches open
deficits to spare offers with a greedy largest-deficit-first policy. All
tie-breaks are deterministic (group id, then node id) so the broker's
decisions are reproducible and the transfer log is stable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import InvalidConfig, InvalidRequest
from .fabric import NodeDescriptor
from .planner import Flavor


class GroupRole(Enum):
    DATA_STORAGE = "data_storage"
    GRID_COMPUTE = "grid_compute"
    CLUSTER_SERVICE = "cluster_service"


_ROLE_FLAVOR = {
    GroupRole.DATA_STORAGE: Flavor.DATA,
    GroupRole.GRID_COMPUTE: Flavor.GRID,
    GroupRole.CLUSTER_SERVICE: Flavor.CLUSTER,
}


class GroupStatus(Enum):
    SURPLUS = "surplus"
    DEFICIT = "deficit"
    BALANCED = "balanced"


@dataclass(frozen=True)
class ServiceSpec:
    min_throughput: float = 0.0  # work-units per tick
    min_capacity: int = 0  # bytes
    min_replication: int = 1


@dataclass
class ResourceGroup:
    group_id: int
    role: GroupRole
    members: set[int] = field(default_factory=set)
    service_spec: ServiceSpec = ServiceSpec()
    parent: Optional[int] = None


@dataclass(frozen=True)
class Deficit:
    group_id: int
    kind: str  # "throughput" | "capacity"
    amount: float
    opened_at: int


@dataclass(frozen=True)
class Offer:
    group_id: int
    node_id: int


@dataclass(frozen=True)
class Transfer:
    node_id: int
    from_group: int
    to_group: int
    kind: str
    amount: float


@dataclass
class BrokerLedger:
    deficits: list[Deficit] = field(default_factory=list)
    offers: list[Offer] = field(default_factory=list)
    transfer_log: list[str] = field(default_factory=list)


class Steward:
    """Root broker over a forest of resource groups."""

    def __init__(
        self,
        descriptor_of: Callable[[int], NodeDescriptor],
        is_node_up: Optional[Callable[[int], bool]] = None,
        clock: Optional[Callable[[], int]] = None,
    ):
        self.descriptor_of = descriptor_of
        self.is_node_up = is_node_up or (lambda node_id: True)
        self.clock = clock or (lambda: 0)
        self.groups: dict[int, ResourceGroup] = {}
        self.ledger = BrokerLedger()
        self._next_group = 1

    # -- group management -----------------------------------------------------

    def create_group(
        self,
        role: GroupRole,
        members: Optional[set[int]] = None,
        spec: ServiceSpec = ServiceSpec(),
        parent: Optional[int] = None,
    ) -> ResourceGroup:
        members = set(members or ())
        for node_id in members:
            if self.descriptor_of(node_id).flavor is not _ROLE_FLAVOR[role]:
                raise InvalidConfig(
                    f"node {node_id} does not match group role {role.value}"
                )
        group = ResourceGroup(self._next_group, role, members, spec, parent)
        self._next_group += 1
        self.groups[group.group_id] = group
        self._check_forest()
        return group

    def _check_forest(self) -> None:
        for group in self.groups.values():
            seen = set()
            current: Optional[int] = group.group_id
            while current is not None:
                if current in seen:
                    raise InvalidConfig("resource group parents form a cycle")
                seen.add(current)
                current = self.groups[current].parent if current in self.groups else None

    def group_of(self, node_id: int) -> Optional[int]:
        for group in self.groups.values():
            if node_id in group.members:
                return group.group_id
        return None

    # -- status ---------------------------------------------------------------

    def _capability(self, group: ResourceGroup, without: Optional[int] = None) -> tuple[float, int]:
        throughput = 0.0
        capacity = 0
        for node_id in group.members:
            if node_id == without or not self.is_node_up(node_id):
                continue
            descriptor = self.descriptor_of(node_id)
            throughput += descriptor.compute_capacity
            capacity += descriptor.storage_capacity
        return throughput, capacity

    def _meets_spec(self, group: ResourceGroup, without: Optional[int] = None) -> bool:
        throughput, capacity = self._capability(group, without)
        spec = group.service_spec
        live = [n for n in group.members if n != without and self.is_node_up(n)]
        return (
            throughput >= spec.min_throughput
            and capacity >= spec.min_capacity
            and len(live) >= spec.min_replication
        )

    def report_status(self, group_id: int) -> GroupStatus:
        if group_id not in self.groups:
            raise InvalidRequest(f"unknown resource group {group_id}")
        group = self.groups[group_id]
        if not self._meets_spec(group):
            return GroupStatus.DEFICIT
        live = sorted(n for n in group.members if self.is_node_up(n))
        for node_id in live:
            if self._meets_spec(group, without=node_id):
                return GroupStatus.SURPLUS
        return GroupStatus.BALANCED

    def shortfall(self, group_id: int) -> tuple[str, float]:
        """Largest unmet dimension of a group's spec as (kind, amount)."""
        group = self.groups[group_id]
        throughput, capacity = self._capability(group)
        spec = group.service_spec
        gaps = [
            ("throughput", max(0.0, spec.min_throughput - throughput)),
            ("capacity", float(max(0, spec.min_capacity - capacity))),
        ]
        gaps.sort(key=lambda g: (-g[1], g[0]))
        return gaps[0]

    # -- broker ---------------------------------------------------------------

    def collect_reports(self) -> None:
        """Refresh the ledger from every group's own status report."""
        self.ledger.deficits = []
        self.ledger.offers = []
        offered: set[int] = set()
        for group_id in sorted(self.groups):
            status = self.report_status(group_id)
            if status is GroupStatus.DEFICIT:
                kind, amount = self.shortfall(group_id)
                self.ledger.deficits.append(Deficit(group_id, kind, amount, self.clock()))
            elif status is GroupStatus.SURPLUS:
                group = self.groups[group_id]
                # Offer every member whose departure keeps the group at spec.
                for node_id in sorted(group.members):
                    if node_id in offered or not self.is_node_up(node_id):
                        continue
                    if self._meets_spec(group, without=node_id):
                        self.ledger.offers.append(Offer(group_id, node_id))
                        offered.add(node_id)

    def broker_match(self) -> list[Transfer]:
        """Serve deficits largest-first from matching-flavor offers."""
        self.collect_reports()
        transfers: list[Transfer] = []
        deficits = sorted(self.ledger.deficits, key=lambda d: (-d.amount, d.group_id))
        for deficit in deficits:
            group = self.groups[deficit.group_id]
            flavor = _ROLE_FLAVOR[group.role]
            while not self._meets_spec(group):
                candidates = sorted(
                    (
                        offer
                        for offer in self.ledger.offers
                        if self.descriptor_of(offer.node_id).flavor is flavor
                    ),
                    key=lambda o: o.node_id,
                )
                if not candidates:
                    break
                offer = candidates[0]
                self.ledger.offers.remove(offer)
                self.groups[offer.group_id].members.discard(offer.node_id)
                group.members.add(offer.node_id)
                transfer = Transfer(offer.node_id, offer.group_id, group.group_id,
                                    deficit.kind, deficit.amount)
                transfers.append(transfer)
                self.ledger.transfer_log.append(
                    f"{self.clock():8d} transfer node={transfer.node_id} "
                    f"from=g{transfer.from_group} to=g{transfer.to_group} "
                    f"kind={transfer.kind} amount={transfer.amount:.2f}"
                )
        # Deficits still unmet stay open for the next cycle.
        self.ledger.deficits = [
            d for d in self.ledger.deficits if not self._meets_spec(self.groups[d.group_id])
        ]
        self._check_forest()
        return transfers

    def add_resource(self, descriptor: NodeDescriptor) -> int:
        """Place a fresh node: open deficit first, else neediest group of its role."""
        if self.group_of(descriptor.node_id) is not None:
            raise InvalidRequest(f"node {descriptor.node_id} is already grouped")
        flavor = descriptor.flavor
        open_deficits = [
            d for d in self.ledger.deficits
            if _ROLE_FLAVOR[self.groups[d.group_id].role] is flavor
        ]
        if open_deficits:
            target = sorted(open_deficits, key=lambda d: (-d.amount, d.group_id))[0]
            group = self.groups[target.group_id]
            group.members.add(descriptor.node_id)
            if self._meets_spec(group):
                self.ledger.deficits.remove(target)
            self.ledger.transfer_log.append(
                f"{self.clock():8d} add node={descriptor.node_id} to=g{group.group_id} reason=deficit"
            )
            return group.group_id
        role_groups = [g for g in self.groups.values() if _ROLE_FLAVOR[g.role] is flavor]
        if not role_groups:
            role = next(r for r, f in _ROLE_FLAVOR.items() if f is flavor)
            group = self.create_group(role, {descriptor.node_id})
            self.ledger.transfer_log.append(
                f"{self.clock():8d} add node={descriptor.node_id} to=g{group.group_id} reason=new_group"
            )
            return group.group_id

        def ratio(group: ResourceGroup) -> float:
            throughput, _ = self._capability(group)
            spec = group.service_spec.min_throughput
            if spec <= 0:
                return float("inf")
            return throughput / spec

        target_group = sorted(role_groups, key=lambda g: (ratio(g), g.group_id))[0]
        target_group.members.add(descriptor.node_id)
        self.ledger.transfer_log.append(
            f"{self.clock():8d} add node={descriptor.node_id} to=g{target_group.group_id} reason=lowest_ratio"
        )
        return target_group.group_id
