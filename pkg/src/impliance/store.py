"""Append-only document store with sequential versioning and replica tracking.

Durable layout: one append-only segment file per data node plus a registry
journal. Records are framed (4-byte LE length prefix + canonical tree
serialization) and hashed with 64-bit FNV-1a at persist time; the recorded
hash must match on every later read.

The store itself is placement-agnostic: a placement callback supplies the
replica target nodes for each new record, and a liveness callback decides
which replicas are readable. Both default to a single always-up node so the
store works standalone in tests.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from . import formats
from .errors import (
    NoLiveReplica,
    OversizedDocument,
    ParseRejected,
    UnknownDoc,
    UnknownVersion,
    UnknownView,
)
from .model import (
    DocId,
    DocNode,
    Kind,
    Lineage,
    MAX_TREE_DEPTH,
    PathEntry,
    Reference,
    SourceFormat,
    StorageClass,
    StorageClassKind,
    TypedValue,
    UniversalDocument,
    VersionId,
    content_hash,
    deserialize_document,
    extract_paths,
    serialize_document,
    tree_depth,
)

DEFAULT_MAX_DOC_BYTES = 1 << 20

DEFAULT_STORAGE_CLASSES = {
    Kind.BASE: StorageClass(StorageClassKind.USER_BASE, 2),
    Kind.ANNOTATION: StorageClass(StorageClassKind.ANNOTATION_DERIVED, 1),
    Kind.DERIVED: StorageClass(StorageClassKind.ANNOTATION_DERIVED, 1),
}


@dataclass
class ViewDef:
    name: str
    columns: list[tuple[str, str]]  # (column name, path or @pseudo)


@dataclass
class PersistRecord:
    doc: UniversalDocument
    frame: bytes
    hash: int
    replicas: list[int]


class KernelStore:
    def __init__(
        self,
        data_dir: Optional[str] = None,
        origin: int = 1,
        max_doc_bytes: int = DEFAULT_MAX_DOC_BYTES,
        placement: Optional[Callable[[DocId, StorageClass], list[int]]] = None,
        is_node_up: Optional[Callable[[int], bool]] = None,
        storage_classes: Optional[dict[Kind, StorageClass]] = None,
    ):
        self.data_dir = data_dir
        self.origin = origin
        self.max_doc_bytes = max_doc_bytes
        self.placement = placement or (lambda doc_id, sc: [0])
        self.is_node_up = is_node_up or (lambda node_id: True)
        self.storage_classes = dict(DEFAULT_STORAGE_CLASSES)
        if storage_classes:
            self.storage_classes.update(storage_classes)

        self._seq = 0
        self._clock = 0
        self.frames: dict[tuple[DocId, VersionId], bytes] = {}
        self.hashes: dict[tuple[DocId, VersionId], int] = {}
        self.latest: dict[DocId, VersionId] = {}
        self.holders: dict[tuple[DocId, VersionId], list[int]] = {}
        self.node_bytes: dict[int, int] = {}
        self.views: dict[str, ViewDef] = {}
        if data_dir:
            os.makedirs(data_dir, exist_ok=True)

    # -- clock --------------------------------------------------------------

    def tick(self) -> int:
        """Logical timestamp source: strictly increasing per persist."""
        self._clock += 1
        return self._clock

    @property
    def clock(self) -> int:
        return self._clock

    # -- durability ---------------------------------------------------------

    def _segment_path(self, node_id: int) -> str:
        return os.path.join(self.data_dir, f"segment_{node_id}.log")

    def _append_segment(self, node_id: int, frame: bytes) -> None:
        self.node_bytes[node_id] = self.node_bytes.get(node_id, 0) + len(frame)
        if self.data_dir:
            with open(self._segment_path(node_id), "ab") as fh:
                fh.write(frame)

    def _journal(self, doc_id: DocId, version: VersionId, digest: int) -> None:
        if self.data_dir:
            with open(os.path.join(self.data_dir, "registry.journal"), "a") as fh:
                fh.write(f"{doc_id} {version} {digest:016x}\n")

    # -- persistence --------------------------------------------------------

    def _validate(self, doc: UniversalDocument) -> None:
        if tree_depth(doc.root) > MAX_TREE_DEPTH:
            raise OversizedDocument(
                f"tree depth exceeds the configured maximum of {MAX_TREE_DEPTH}"
            )
        for ref in doc.references:
            if ref.target_doc not in self.latest:
                raise UnknownDoc(f"reference target {ref.target_doc} does not exist")
            if not 1 <= ref.target_version <= self.latest[ref.target_doc]:
                raise UnknownVersion(
                    f"reference target {ref.target_doc} has no version {ref.target_version}"
                )
        if doc.lineage:
            for did, ver in doc.lineage.inputs:
                if self.latest.get(did, 0) < ver:
                    raise UnknownDoc(f"lineage input ({did}, v{ver}) is not resolvable")

    def persist(self, doc: UniversalDocument) -> PersistRecord:
        """Append an immutable record, replicated per the document's storage class."""
        self._validate(doc)
        frame = serialize_document(doc)
        if len(frame) > self.max_doc_bytes:
            raise OversizedDocument(
                f"record is {len(frame)} bytes; limit is {self.max_doc_bytes}"
            )
        digest = content_hash(frame)
        storage_class = self.storage_classes[doc.kind]
        replicas = self.placement(doc.doc_id, storage_class)
        key = (doc.doc_id, doc.version)
        self.frames[key] = frame
        self.hashes[key] = digest
        self.holders[key] = list(replicas)
        self.latest[doc.doc_id] = doc.version
        for node_id in replicas:
            self._append_segment(node_id, frame)
        self._journal(doc.doc_id, doc.version, digest)
        return PersistRecord(doc, frame, digest, list(replicas))

    def new_doc_id(self) -> DocId:
        self._seq += 1
        return DocId(self.origin, self._seq)

    def ingest(self, raw: bytes, source_format: SourceFormat) -> tuple[DocId, VersionId]:
        """Map a raw payload into the native model and persist version 1."""
        if len(raw) > self.max_doc_bytes:
            raise OversizedDocument(
                f"payload is {len(raw)} bytes; limit is {self.max_doc_bytes}"
            )
        try:
            root = formats.parse_payload(raw, source_format)
        except formats.ParseError as exc:
            raise ParseRejected(str(exc), exc.position) from exc
        doc_id = self.new_doc_id()
        doc = UniversalDocument(
            doc_id=doc_id,
            version=1,
            kind=Kind.BASE,
            source_format=source_format,
            root=root,
            ingested_at=self.tick(),
        )
        self.persist(doc)
        return doc_id, 1

    def update(self, doc_id: DocId, new_root: DocNode) -> VersionId:
        """Append a new version; previous versions stay readable byte-identically."""
        if doc_id not in self.latest:
            raise UnknownDoc(f"unknown document {doc_id}")
        previous = self.get(doc_id)
        doc = UniversalDocument(
            doc_id=doc_id,
            version=self.latest[doc_id] + 1,
            kind=previous.kind,
            source_format=previous.source_format,
            root=new_root,
            references=previous.references,
            lineage=previous.lineage,
            ingested_at=self.tick(),
        )
        self.persist(doc)
        return doc.version

    def persist_derived(
        self,
        root: DocNode,
        kind: Kind,
        references: list[Reference],
        lineage: Optional[Lineage],
        source_format: SourceFormat = SourceFormat.JSON_LIKE,
    ) -> tuple[DocId, VersionId]:
        doc = UniversalDocument(
            doc_id=self.new_doc_id(),
            version=1,
            kind=kind,
            source_format=source_format,
            root=root,
            references=references,
            lineage=lineage,
            ingested_at=self.tick(),
        )
        self.persist(doc)
        return doc.doc_id, 1

    # -- reads --------------------------------------------------------------

    def frame_of(self, doc_id: DocId, version: Optional[VersionId] = None) -> bytes:
        if doc_id not in self.latest:
            raise UnknownDoc(f"unknown document {doc_id}")
        if version is None:
            version = self.latest[doc_id]
        if not 1 <= version <= self.latest[doc_id]:
            raise UnknownVersion(f"document {doc_id} has no version {version}")
        key = (doc_id, version)
        if not any(self.is_node_up(n) for n in self.holders[key]):
            raise NoLiveReplica(f"no live replica holds ({doc_id}, v{version})")
        return self.frames[key]

    def get(self, doc_id: DocId, version: Optional[VersionId] = None) -> UniversalDocument:
        return deserialize_document(self.frame_of(doc_id, version))

    def hash_of(self, doc_id: DocId, version: VersionId) -> int:
        key = (doc_id, version)
        if key not in self.hashes:
            raise UnknownVersion(f"no record for ({doc_id}, v{version})")
        return self.hashes[key]

    def latest_docs(self) -> Iterator[UniversalDocument]:
        """All documents at their latest version, in DocId order."""
        for doc_id in sorted(self.latest):
            yield self.get(doc_id)

    def add_replica(self, doc_id: DocId, version: VersionId, node_id: int) -> None:
        """Copy one record onto an additional node (repair path)."""
        key = (doc_id, version)
        if node_id not in self.holders[key]:
            self.holders[key].append(node_id)
            self._append_segment(node_id, self.frames[key])

    def drop_replica_node(self, node_id: int) -> None:
        """Forget a failed node's copies (its segment file is gone with it)."""
        for key, nodes in self.holders.items():
            if node_id in nodes:
                nodes.remove(node_id)
        self.node_bytes[node_id] = 0

    # -- relational views ---------------------------------------------------

    def register_view(self, name: str, columns: list[tuple[str, str]]) -> None:
        self.views[name] = ViewDef(name, list(columns))

    @staticmethod
    def value_at(doc: UniversalDocument, path: str) -> Optional[TypedValue]:
        for entry in extract_paths(doc):
            if entry.path == path and entry.position == 0:
                return entry.value
        return None

    def relational_view(
        self,
        view_name: str,
        doc_filter: Optional[Callable[[UniversalDocument], bool]] = None,
    ) -> list[list[Optional[TypedValue]]]:
        """Flat rows projected from latest-version documents.

        A document matches when the filter accepts it, or (with no filter)
        when at least one mapped non-pseudo path is present. Pseudo columns:
        "@id" projects the document id, "@annotates" the first annotation
        target, enabling joins between base and annotation views.
        """
        if view_name not in self.views:
            raise UnknownView(f"view {view_name!r} is not registered")
        view = self.views[view_name]
        paths = [p for _, p in view.columns if not p.startswith("@")]
        rows = []
        for doc in self.latest_docs():
            present = {e.path: e.value for e in extract_paths(doc) if e.position == 0}
            if doc_filter is not None and not doc_filter(doc):
                continue
            if paths and not any(p in present for p in paths):
                continue
            row: list[Optional[TypedValue]] = []
            for _, path in view.columns:
                if path == "@id":
                    row.append(str(doc.doc_id))
                elif path == "@annotates":
                    target = next(
                        (str(r.target_doc) for r in doc.references if r.relation == "annotates"),
                        None,
                    )
                    row.append(target)
                else:
                    row.append(present.get(path))
            rows.append(row)
        return rows
