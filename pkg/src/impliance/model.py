"""Core document model: labeled trees, typed values, identity, lineage.

Every piece of data in the appliance, whatever its source format, lives as a
UniversalDocument: an immutable, versioned tree of labeled nodes with typed
leaf values, plus references to other documents and an optional lineage
record for derived data.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

MAX_TREE_DEPTH = 32

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over a byte string."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _U64
    return h


@dataclass(frozen=True, order=True)
class DocId:
    """Globally unique document identity: (ingesting origin, per-origin counter)."""

    origin: int
    sequence: int

    def __str__(self) -> str:
        return f"{self.origin}-{self.sequence}"

    @classmethod
    def parse(cls, text: str) -> "DocId":
        origin, _, seq = text.partition("-")
        return cls(int(origin), int(seq))


# Versions are dense positive integers per DocId; a bare int is enough.
VersionId = int


@dataclass(frozen=True)
class Timestamp:
    """Logical timestamp value (distinct from plain integers in the value system)."""

    value: int


TypedValue = Union[str, int, float, bool, Timestamp]


class Kind(Enum):
    BASE = "base"
    ANNOTATION = "annotation"
    DERIVED = "derived"


class SourceFormat(Enum):
    RELATIONAL_ROW = "relational_row"
    DELIMITED = "delimited"
    JSON_LIKE = "json_like"
    XML_LIKE = "xml_like"
    PLAIN_TEXT = "plain_text"


@dataclass
class DocNode:
    label: str
    value: Optional[TypedValue] = None
    children: list["DocNode"] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("node label must be non-empty")


@dataclass(frozen=True)
class Reference:
    target_doc: DocId
    target_version: VersionId
    relation: str

    def __post_init__(self) -> None:
        if not self.relation:
            raise ValueError("reference relation must be non-empty")


@dataclass(frozen=True)
class Lineage:
    producer: str
    inputs: tuple[tuple[DocId, VersionId], ...]


class StorageClassKind(Enum):
    USER_BASE = "user_base"
    ANNOTATION_DERIVED = "annotation_derived"
    INDEX_DERIVED = "index_derived"


@dataclass(frozen=True)
class StorageClass:
    kind: StorageClassKind
    replication_factor: int

    def __post_init__(self) -> None:
        if self.replication_factor < 1:
            raise ValueError("replication factor must be >= 1")
        if self.kind is StorageClassKind.USER_BASE and self.replication_factor < 2:
            raise ValueError("user_base replication factor must be >= 2")


@dataclass
class UniversalDocument:
    doc_id: DocId
    version: VersionId
    kind: Kind
    source_format: SourceFormat
    root: DocNode
    references: list[Reference] = field(default_factory=list)
    lineage: Optional[Lineage] = None
    ingested_at: int = 0

    def __post_init__(self) -> None:
        if self.version < 1:
            raise ValueError("version numbers start at 1")
        if self.kind is Kind.ANNOTATION and not self.references:
            raise ValueError("annotation documents must reference their base")
        if self.kind is Kind.DERIVED and self.lineage is None:
            raise ValueError("derived documents must carry lineage")


@dataclass(frozen=True)
class PathEntry:
    """One valued or leaf node: absolute path, value, ordinal among same-path nodes."""

    path: str
    value: Optional[TypedValue]
    position: int


def tree_depth(node: DocNode) -> int:
    depth = 1
    stack = [(node, 1)]
    while stack:
        n, d = stack.pop()
        depth = max(depth, d)
        for c in n.children:
            stack.append((c, d + 1))
    return depth


def extract_paths(doc: UniversalDocument) -> list[PathEntry]:
    """Enumerate (path, value) pairs for every leaf or valued node, depth-first.

    Paths are absolute, '/'-separated labels. Repeated sibling labels produce
    repeated paths distinguished by position (ordinal among same-path entries,
    in document order).
    """
    entries: list[PathEntry] = []
    counters: dict[str, int] = {}

    def visit(node: DocNode, prefix: str) -> None:
        path = prefix + "/" + node.label
        if node.value is not None or not node.children:
            pos = counters.get(path, 0)
            counters[path] = pos + 1
            entries.append(PathEntry(path, node.value, pos))
        for child in node.children:
            visit(child, path)

    visit(doc.root, "")
    return entries


# ---------------------------------------------------------------------------
# Canonical serialization: depth-first, label-length-prefixed, little-endian.
# The framed record (4-byte LE length prefix + payload) is the unit that gets
# appended to segment files and hashed with FNV-1a.
# ---------------------------------------------------------------------------

_TAG_NONE = 0
_TAG_STR = 1
_TAG_INT = 2
_TAG_FLOAT = 3
_TAG_BOOL = 4
_TAG_TS = 5


def _encode_value(value: Optional[TypedValue], out: bytearray) -> None:
    if value is None:
        out.append(_TAG_NONE)
    elif isinstance(value, bool):  # bool before int: bool is an int subclass
        out.append(_TAG_BOOL)
        out.append(1 if value else 0)
    elif isinstance(value, int):
        out.append(_TAG_INT)
        out += struct.pack("<q", value)
    elif isinstance(value, float):
        out.append(_TAG_FLOAT)
        out += struct.pack("<d", value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(_TAG_STR)
        out += struct.pack("<I", len(raw))
        out += raw
    elif isinstance(value, Timestamp):
        out.append(_TAG_TS)
        out += struct.pack("<q", value.value)
    else:
        raise TypeError(f"unsupported value type: {type(value)!r}")


def _decode_value(buf: bytes, pos: int) -> tuple[Optional[TypedValue], int]:
    tag = buf[pos]
    pos += 1
    if tag == _TAG_NONE:
        return None, pos
    if tag == _TAG_BOOL:
        return bool(buf[pos]), pos + 1
    if tag == _TAG_INT:
        return struct.unpack_from("<q", buf, pos)[0], pos + 8
    if tag == _TAG_FLOAT:
        return struct.unpack_from("<d", buf, pos)[0], pos + 8
    if tag == _TAG_STR:
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        return buf[pos : pos + n].decode("utf-8"), pos + n
    if tag == _TAG_TS:
        return Timestamp(struct.unpack_from("<q", buf, pos)[0]), pos + 8
    raise ValueError(f"bad value tag {tag}")


def _encode_node(node: DocNode, out: bytearray) -> None:
    raw = node.label.encode("utf-8")
    out += struct.pack("<I", len(raw))
    out += raw
    _encode_value(node.value, out)
    out += struct.pack("<I", len(node.children))
    for child in node.children:
        _encode_node(child, out)


def _decode_node(buf: bytes, pos: int) -> tuple[DocNode, int]:
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    label = buf[pos : pos + n].decode("utf-8")
    pos += n
    value, pos = _decode_value(buf, pos)
    (nchildren,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    children = []
    for _ in range(nchildren):
        child, pos = _decode_node(buf, pos)
        children.append(child)
    return DocNode(label, value, children), pos


_KINDS = list(Kind)
_FORMATS = list(SourceFormat)


def serialize_document(doc: UniversalDocument) -> bytes:
    """Canonical framed record: 4-byte LE length prefix + payload."""
    out = bytearray()
    out += struct.pack(
        "<QQIBBQ",
        doc.doc_id.origin,
        doc.doc_id.sequence,
        doc.version,
        _KINDS.index(doc.kind),
        _FORMATS.index(doc.source_format),
        doc.ingested_at,
    )
    out += struct.pack("<I", len(doc.references))
    for ref in doc.references:
        out += struct.pack("<QQI", ref.target_doc.origin, ref.target_doc.sequence, ref.target_version)
        raw = ref.relation.encode("utf-8")
        out += struct.pack("<I", len(raw))
        out += raw
    if doc.lineage is None:
        out.append(0)
    else:
        out.append(1)
        raw = doc.lineage.producer.encode("utf-8")
        out += struct.pack("<I", len(raw))
        out += raw
        out += struct.pack("<I", len(doc.lineage.inputs))
        for did, ver in doc.lineage.inputs:
            out += struct.pack("<QQI", did.origin, did.sequence, ver)
    _encode_node(doc.root, out)
    return struct.pack("<I", len(out)) + bytes(out)


def deserialize_document(record: bytes) -> UniversalDocument:
    (length,) = struct.unpack_from("<I", record, 0)
    buf = record[4 : 4 + length]
    origin, seq, version, kind_i, fmt_i, ingested = struct.unpack_from("<QQIBBQ", buf, 0)
    pos = struct.calcsize("<QQIBBQ")
    (nrefs,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    refs = []
    for _ in range(nrefs):
        t_origin, t_seq, t_ver = struct.unpack_from("<QQI", buf, pos)
        pos += struct.calcsize("<QQI")
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        relation = buf[pos : pos + n].decode("utf-8")
        pos += n
        refs.append(Reference(DocId(t_origin, t_seq), t_ver, relation))
    lineage = None
    if buf[pos]:
        pos += 1
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        producer = buf[pos : pos + n].decode("utf-8")
        pos += n
        (nin,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        inputs = []
        for _ in range(nin):
            i_origin, i_seq, i_ver = struct.unpack_from("<QQI", buf, pos)
            pos += struct.calcsize("<QQI")
            inputs.append((DocId(i_origin, i_seq), i_ver))
        lineage = Lineage(producer, tuple(inputs))
    else:
        pos += 1
    root, pos = _decode_node(buf, pos)
    return UniversalDocument(
        doc_id=DocId(origin, seq),
        version=version,
        kind=_KINDS[kind_i],
        source_format=_FORMATS[fmt_i],
        root=root,
        references=refs,
        lineage=lineage,
        ingested_at=ingested,
    )


def content_hash(record: bytes) -> int:
    """64-bit FNV-1a over the framed record."""
    return fnv1a64(record)


def value_sort_key(value: TypedValue) -> tuple:
    """Total order across mixed-type values: group by type, then natural order."""
    if isinstance(value, bool):
        return (0, value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (1, float(value), 0 if isinstance(value, int) else 1)
    if isinstance(value, str):
        return (2, value)
    if isinstance(value, Timestamp):
        return (3, value.value)
    raise TypeError(f"unsupported value type: {type(value)!r}")


def value_text(value: TypedValue) -> str:
    """Deterministic text form used for tokenization and display."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Timestamp):
        return f"@{value.value}"
    if isinstance(value, float):
        return repr(value)
    return str(value)
