"""Value (keyword) and structure (path) indexes, partitioned and incremental.

Index partitions are co-located with document partitions: postings for a
document live in the index partition matching the document's partition, so
scans parallelize across data nodes and a lost partition can be rebuilt from
the surviving document replicas.

Tokenization is deliberately plain: lowercase, split on non-alphanumerics,
drop empties. No stemming, no stop words.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .model import (
    DocId,
    PathEntry,
    TypedValue,
    UniversalDocument,
    VersionId,
    extract_paths,
    value_sort_key,
    value_text,
)

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


class KeyKind(Enum):
    TOKEN = "token"
    PATH = "path"
    PATH_VALUE = "path_value"


@dataclass(frozen=True)
class IndexKey:
    kind: KeyKind
    token: Optional[str] = None
    path: Optional[str] = None
    value: Optional[TypedValue] = None

    def __post_init__(self) -> None:
        if self.kind is KeyKind.TOKEN and (self.token is None or self.path is not None or self.value is not None):
            raise ValueError("token key carries exactly a token")
        if self.kind is KeyKind.PATH and (self.path is None or self.token is not None or self.value is not None):
            raise ValueError("path key carries exactly a path")
        if self.kind is KeyKind.PATH_VALUE and (self.path is None or self.value is None or self.token is not None):
            raise ValueError("path_value key carries a path and a value")

    @staticmethod
    def for_token(token: str) -> "IndexKey":
        return IndexKey(KeyKind.TOKEN, token=token)

    @staticmethod
    def for_path(path: str) -> "IndexKey":
        return IndexKey(KeyKind.PATH, path=path)

    @staticmethod
    def for_path_value(path: str, value: TypedValue) -> "IndexKey":
        return IndexKey(KeyKind.PATH_VALUE, path=path, value=value)


@dataclass(frozen=True)
class Posting:
    doc_id: DocId
    version: VersionId
    path: str
    position: int
    payload: Optional[TypedValue] = None

    def sort_key(self) -> tuple:
        return (self.doc_id, self.version, self.path, self.position)


@dataclass(frozen=True)
class IndexEpoch:
    high_watermark: int


def _value_key(value: TypedValue) -> tuple:
    return value_sort_key(value)


class PartitionIndex:
    """Single-writer posting maps for one document partition."""

    def __init__(self) -> None:
        self.tokens: dict[str, dict[tuple, Posting]] = {}
        self.paths: dict[str, dict[tuple, Posting]] = {}
        self.path_values: dict[tuple[str, tuple], dict[tuple, Posting]] = {}
        self.pv_display: dict[tuple[str, tuple], TypedValue] = {}
        self.indexed: set[tuple[DocId, VersionId]] = set()

    def add_document(self, doc: UniversalDocument) -> int:
        key = (doc.doc_id, doc.version)
        if key in self.indexed:
            return 0
        self.indexed.add(key)
        added = 0
        token_counters: dict[str, int] = {}
        for entry in extract_paths(doc):
            posting = Posting(doc.doc_id, doc.version, entry.path, entry.position)
            self.paths.setdefault(entry.path, {})[posting.sort_key()] = posting
            added += 1
            if entry.value is None:
                continue
            vkey = (entry.path, _value_key(entry.value))
            pv = Posting(doc.doc_id, doc.version, entry.path, entry.position, entry.value)
            self.path_values.setdefault(vkey, {})[pv.sort_key()] = pv
            self.pv_display.setdefault(vkey, entry.value)
            added += 1
            for token in tokenize(value_text(entry.value)):
                ordinal = token_counters.get(token, 0)
                token_counters[token] = ordinal + 1
                tp = Posting(doc.doc_id, doc.version, entry.path, ordinal, entry.value)
                self.tokens.setdefault(token, {})[tp.sort_key()] = tp
                added += 1
        return added

    def drop_document(self, doc_id: DocId, version: VersionId) -> None:
        if (doc_id, version) not in self.indexed:
            return
        self.indexed.discard((doc_id, version))
        for table in (self.tokens, self.paths, self.path_values):
            for postings in table.values():
                stale = [k for k, p in postings.items() if p.doc_id == doc_id and p.version == version]
                for k in stale:
                    del postings[k]

    def lookup(self, key: IndexKey) -> list[Posting]:
        if key.kind is KeyKind.TOKEN:
            table = self.tokens.get(key.token, {})
        elif key.kind is KeyKind.PATH:
            table = self.paths.get(key.path, {})
        else:
            table = self.path_values.get((key.path, _value_key(key.value)), {})
        return sorted(table.values(), key=Posting.sort_key)

    def values_at(self, path: str) -> list[tuple[TypedValue, list[Posting]]]:
        """Distinct indexed values under a path with their postings (value order)."""
        out = []
        for (p, vkey), postings in self.path_values.items():
            if p == path:
                out.append((vkey, self.pv_display[(p, vkey)], postings))
        out.sort(key=lambda item: item[0])
        return [(display, sorted(ps.values(), key=Posting.sort_key)) for _, display, ps in out]


class IndexManager:
    """Partitioned value/structure index with an explicit staleness watermark."""

    def __init__(self, partitions: int):
        self.partitions = {p: PartitionIndex() for p in range(partitions)}
        self.high_watermark = 0

    def epoch(self) -> IndexEpoch:
        return IndexEpoch(self.high_watermark)

    def advance(self, watermark: int) -> IndexEpoch:
        self.high_watermark = max(self.high_watermark, watermark)
        return self.epoch()

    def index_document(self, doc: UniversalDocument, partition: int) -> int:
        added = self.partitions[partition].add_document(doc)
        self.advance(doc.ingested_at)
        return added

    def maintain(self, batch: Iterable[tuple[UniversalDocument, int]]) -> IndexEpoch:
        """Merge postings for a persisted batch without touching existing ones."""
        for doc, partition in batch:
            self.index_document(doc, partition)
        return self.epoch()

    def lookup(self, key: IndexKey) -> list[Posting]:
        out: list[Posting] = []
        for p in sorted(self.partitions):
            out.extend(self.partitions[p].lookup(key))
        out.sort(key=Posting.sort_key)
        return out

    def lookup_partition(self, key: IndexKey, partition: int) -> list[Posting]:
        return self.partitions[partition].lookup(key)

    def posting_count(self, key: IndexKey) -> int:
        return len(self.lookup(key))

    def doc_frequency(self, token: str) -> int:
        return len({(p.doc_id, p.version) for p in self.lookup(IndexKey.for_token(token))})

    def has_path(self, path: str) -> bool:
        return any(path in part.paths and part.paths[path] for part in self.partitions.values())

    def drop_partition(self, partition: int) -> None:
        self.partitions[partition] = PartitionIndex()

    def add_partitions(self, upto: int) -> None:
        for p in range(upto):
            self.partitions.setdefault(p, PartitionIndex())

    def drop_document(self, doc_id: DocId, version: VersionId, partition: int) -> None:
        self.partitions[partition].drop_document(doc_id, version)
