"""A desk-scale information appliance: one immutable document store, an
asynchronous index/annotation pipeline, and a faceted/connection query
engine executing over a simulated three-flavor cluster."""

from .config import ApplianceConfig, load_config, parse_config
from .engine import Engine
from .errors import ApplianceError
from .fabric import ClusterConfig, CostModel, Fabric, Flavor, Priority
from .model import (
    DocId,
    DocNode,
    Kind,
    Lineage,
    Reference,
    SourceFormat,
    Timestamp,
    UniversalDocument,
)
from .planner import (
    AggregateRequest,
    ConnectionRequest,
    SearchRequest,
    StructuralPredicate,
    ViewQuery,
)
from .query import DrillState, SearchResult
from .workload import metrics_report, run_script

__all__ = [
    "AggregateRequest",
    "ApplianceConfig",
    "ApplianceError",
    "ClusterConfig",
    "ConnectionRequest",
    "CostModel",
    "DocId",
    "DocNode",
    "DrillState",
    "Engine",
    "Fabric",
    "Flavor",
    "Kind",
    "Lineage",
    "Priority",
    "Reference",
    "SearchRequest",
    "SearchResult",
    "SourceFormat",
    "StructuralPredicate",
    "Timestamp",
    "UniversalDocument",
    "ViewQuery",
    "load_config",
    "metrics_report",
    "parse_config",
    "run_script",
]

__version__ = "0.1.0"
