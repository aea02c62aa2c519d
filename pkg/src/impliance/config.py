"""Appliance configuration: one INI-style file, sections documented below.

Sections and fields (all optional; defaults give a working desk-scale box):

  [cluster]      data_nodes, grid_nodes, cluster_nodes, partitions,
                 group_size, data_capacity, grid_capacity, cluster_capacity,
                 io_bandwidth, storage_capacity
  [replication]  user_base, annotation_derived, index_derived
  [cost_model]   alpha, beta, gamma, bytes_per_tuple, base_work
  [annotators]   file (path to a JSON annotator definition file)
  [scheduler]    heartbeat_period, missed_heartbeats, aging_threshold

Unknown sections or fields are fatal, with the section/field named.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidConfig
from .fabric import ClusterConfig, CostModel
from .model import Kind, StorageClass, StorageClassKind


@dataclass
class ApplianceConfig:
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    cost: CostModel = field(default_factory=CostModel)
    replication: dict[StorageClassKind, int] = field(
        default_factory=lambda: {
            StorageClassKind.USER_BASE: 2,
            StorageClassKind.ANNOTATION_DERIVED: 1,
            StorageClassKind.INDEX_DERIVED: 1,
        }
    )
    annotator_file: Optional[str] = None
    data_dir: Optional[str] = None
    origin: int = 1
    max_connection_hops: int = 6

    def storage_classes(self) -> dict[Kind, StorageClass]:
        return {
            Kind.BASE: StorageClass(StorageClassKind.USER_BASE,
                                    self.replication[StorageClassKind.USER_BASE]),
            Kind.ANNOTATION: StorageClass(StorageClassKind.ANNOTATION_DERIVED,
                                          self.replication[StorageClassKind.ANNOTATION_DERIVED]),
            Kind.DERIVED: StorageClass(StorageClassKind.ANNOTATION_DERIVED,
                                       self.replication[StorageClassKind.ANNOTATION_DERIVED]),
        }


_INT_FIELDS = {
    "cluster": {"data_nodes", "grid_nodes", "cluster_nodes", "partitions",
                "group_size", "storage_capacity"},
    "replication": {"user_base", "annotation_derived", "index_derived"},
    "cost_model": {"bytes_per_tuple"},
    "scheduler": {"heartbeat_period", "missed_heartbeats", "aging_threshold"},
    "appliance": {"origin", "max_connection_hops"},
}
_FLOAT_FIELDS = {
    "cluster": {"data_capacity", "grid_capacity", "cluster_capacity", "io_bandwidth"},
    "cost_model": {"alpha", "beta", "gamma", "base_work"},
}
_STR_FIELDS = {
    "annotators": {"file"},
    "appliance": {"data_dir"},
}
_KNOWN_SECTIONS = set(_INT_FIELDS) | set(_FLOAT_FIELDS) | set(_STR_FIELDS)


def parse_config(text: str, base_dir: str = ".") -> ApplianceConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfig(f"config syntax error: {exc}") from exc

    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _KNOWN_SECTIONS:
            raise InvalidConfig(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key in _INT_FIELDS.get(section, ()):
                try:
                    values[section][key] = int(raw)
                except ValueError as exc:
                    raise InvalidConfig(f"[{section}] {key}: expected integer, got {raw!r}") from exc
            elif key in _FLOAT_FIELDS.get(section, ()):
                try:
                    values[section][key] = float(raw)
                except ValueError as exc:
                    raise InvalidConfig(f"[{section}] {key}: expected number, got {raw!r}") from exc
            elif key in _STR_FIELDS.get(section, ()):
                values[section][key] = raw
            else:
                raise InvalidConfig(f"unknown field {key!r} in section [{section}]")

    cluster_kw = dict(values.get("cluster", {}))
    cluster_kw.update({k: v for k, v in values.get("scheduler", {}).items()})
    try:
        cluster = ClusterConfig(**cluster_kw)
        cost = CostModel(**values.get("cost_model", {}))
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc

    config = ApplianceConfig(cluster=cluster, cost=cost)
    repl = values.get("replication", {})
    if "user_base" in repl:
        config.replication[StorageClassKind.USER_BASE] = int(repl["user_base"])
    if "annotation_derived" in repl:
        config.replication[StorageClassKind.ANNOTATION_DERIVED] = int(repl["annotation_derived"])
    if "index_derived" in repl:
        config.replication[StorageClassKind.INDEX_DERIVED] = int(repl["index_derived"])
    if config.replication[StorageClassKind.USER_BASE] < 2:
        raise InvalidConfig("[replication] user_base must be >= 2")
    ann = values.get("annotators", {}).get("file")
    if ann:
        path = os.path.join(base_dir, str(ann))
        if not os.path.exists(path):
            raise InvalidConfig(f"[annotators] file: {path!r} does not exist")
        config.annotator_file = path
    app = values.get("appliance", {})
    if "data_dir" in app:
        config.data_dir = os.path.join(base_dir, str(app["data_dir"]))
    config.origin = int(app.get("origin", 1))
    config.max_connection_hops = int(app.get("max_connection_hops", 6))
    return config


def load_config(path: str) -> ApplianceConfig:
    if not os.path.exists(path):
        raise InvalidConfig(f"config file {path!r} does not exist")
    with open(path) as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))
