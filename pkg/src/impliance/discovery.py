"""Enrichment pipeline: rule annotators, entity resolution, join indexes.

Annotators are deterministic dictionary/pattern rules. Intra-document runs
extract entities from one document; inter-document resolution pairs up
documents sharing a normalized entity key and records the pairs in a join
index that is queryable from either side.

The pipeline itself only computes; task staging across node flavors and the
actual persisting of annotation documents are driven by the engine through
the cluster fabric.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import DuplicateAnnotator, InvalidConfig
from .model import (
    DocId,
    DocNode,
    Kind,
    Lineage,
    Reference,
    SourceFormat,
    UniversalDocument,
    VersionId,
    extract_paths,
)


class AnnotatorScope(Enum):
    INTRA = "intra"
    INTER = "inter"


def normalize_entity_text(text: str) -> str:
    """Exact-match entity resolution key: lowercase, collapsed whitespace."""
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class Selector:
    """Matches documents by source format and/or required path presence."""

    formats: Optional[frozenset[SourceFormat]] = None
    required_paths: tuple[str, ...] = ()

    def matches(self, doc: UniversalDocument) -> bool:
        if doc.kind is not Kind.BASE:
            return False
        if self.formats is not None and doc.source_format not in self.formats:
            return False
        if self.required_paths:
            present = {e.path for e in extract_paths(doc)}
            if not all(p in present for p in self.required_paths):
                return False
        return True


@dataclass(frozen=True)
class PatternRule:
    pattern: str
    entity_type: str


@dataclass
class AnnotatorSpec:
    name: str
    scope: AnnotatorScope
    selector: Selector
    dictionary: dict[str, str] = field(default_factory=dict)  # entity text -> type
    patterns: list[PatternRule] = field(default_factory=list)

    def compiled_rules(self) -> list[tuple[re.Pattern, str, Optional[str]]]:
        rules = []
        for text, entity_type in sorted(self.dictionary.items()):
            pat = re.compile(r"\b" + re.escape(text) + r"\b", re.IGNORECASE)
            rules.append((pat, entity_type, normalize_entity_text(text)))
        for rule in self.patterns:
            rules.append((re.compile(rule.pattern, re.IGNORECASE), rule.entity_type, None))
        return rules


@dataclass(frozen=True)
class Entity:
    entity_type: str
    text: str  # normalized
    source_path: str
    span: tuple[int, int]  # char offsets within the source value's text


@dataclass(frozen=True)
class JoinIndexEntry:
    left: tuple[DocId, VersionId]
    right: tuple[DocId, VersionId]
    relation: str
    evidence: tuple[str, str]  # (entity_type, normalized text)


def run_intra(doc: UniversalDocument, spec: AnnotatorSpec) -> list[Entity]:
    """Apply one annotator's rules to every string value of a document."""
    if spec.scope is not AnnotatorScope.INTRA:
        raise InvalidConfig(f"annotator {spec.name!r} is not intra-scope")
    entities: list[Entity] = []
    rules = spec.compiled_rules()
    for entry in extract_paths(doc):
        if not isinstance(entry.value, str) or not entry.value:
            continue
        for pattern, entity_type, canonical in rules:
            for m in pattern.finditer(entry.value):
                if m.start() == m.end():
                    continue
                text = canonical or normalize_entity_text(m.group(0))
                entities.append(Entity(entity_type, text, entry.path, (m.start(), m.end())))
    entities.sort(key=lambda e: (e.source_path, e.span, e.entity_type, e.text))
    return entities


def annotation_tree(entities: list[Entity]) -> DocNode:
    children = []
    for e in entities:
        children.append(
            DocNode(
                "entity",
                None,
                [
                    DocNode("entity_type", e.entity_type),
                    DocNode("text", e.text),
                    DocNode("source_path", e.source_path),
                    DocNode("span_start", e.span[0]),
                    DocNode("span_end", e.span[1]),
                ],
            )
        )
    return DocNode("annotation", None, children)


def entities_of(annotation: UniversalDocument) -> list[Entity]:
    """Read entities back out of a persisted annotation document."""
    out = []
    for node in annotation.root.children:
        fields = {c.label: c.value for c in node.children}
        out.append(
            Entity(
                str(fields["entity_type"]),
                str(fields["text"]),
                str(fields["source_path"]),
                (int(fields["span_start"]), int(fields["span_end"])),
            )
        )
    return out


class JoinIndex:
    """Symmetric store of entity-evidence document pairs."""

    def __init__(self) -> None:
        self.entries: dict[tuple, JoinIndexEntry] = {}
        self.by_doc: dict[DocId, list[JoinIndexEntry]] = {}

    @staticmethod
    def _canonical(a: tuple[DocId, VersionId], b: tuple[DocId, VersionId]):
        return (a, b) if a[0] < b[0] else (b, a)

    def add(self, a: tuple[DocId, VersionId], b: tuple[DocId, VersionId],
            relation: str, evidence: tuple[str, str]) -> Optional[JoinIndexEntry]:
        left, right = self._canonical(a, b)
        key = (left, right, relation, evidence)
        if key in self.entries:
            return None
        entry = JoinIndexEntry(left, right, relation, evidence)
        self.entries[key] = entry
        self.by_doc.setdefault(left[0], []).append(entry)
        self.by_doc.setdefault(right[0], []).append(entry)
        return entry

    def for_doc(self, doc_id: DocId) -> list[JoinIndexEntry]:
        return list(self.by_doc.get(doc_id, []))

    def all_entries(self) -> list[JoinIndexEntry]:
        return [self.entries[k] for k in sorted(self.entries, key=repr)]


class EntityRegistry:
    """Incremental inter-document resolution, blocked by normalized entity key.

    resolve() only computes the new pairs; writing them into the join index is
    a separate (cluster-staged) step.
    """

    def __init__(self) -> None:
        self.seen: dict[tuple[str, str], list[tuple[DocId, VersionId]]] = {}

    def resolve(
        self, stream: list[tuple[tuple[str, str], DocId, VersionId]]
    ) -> list[tuple[tuple[DocId, VersionId], tuple[DocId, VersionId], tuple[str, str]]]:
        """Pair each incoming (key, doc) against every prior doc sharing the key."""
        pairs = []
        for key, doc_id, version in stream:
            bucket = self.seen.setdefault(key, [])
            incoming = (doc_id, version)
            if incoming in bucket:
                continue
            for other in bucket:
                if other[0] != incoming[0]:
                    pairs.append((other, incoming, key))
            bucket.append(incoming)
        return pairs


def load_annotator_specs(text: str) -> list[AnnotatorSpec]:
    """Parse the annotator definition file (JSON list; schema in the README)."""
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"annotator file is not valid JSON: {exc}") from exc
    if not isinstance(body, list):
        raise InvalidConfig("annotator file must be a JSON list")
    specs = []
    names = set()
    for i, item in enumerate(body):
        try:
            name = item["name"]
            scope = AnnotatorScope(item.get("scope", "intra"))
            sel = item.get("selector", {})
            formats = sel.get("formats")
            selector = Selector(
                formats=frozenset(SourceFormat(f) for f in formats) if formats else None,
                required_paths=tuple(sel.get("required_paths", ())),
            )
            dictionary = {str(k): str(v) for k, v in item.get("dictionary", {}).items()}
            patterns = [PatternRule(p["pattern"], p["entity_type"]) for p in item.get("patterns", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"annotator entry {i}: {exc}") from exc
        if name in names:
            raise DuplicateAnnotator(f"annotator {name!r} defined twice")
        names.add(name)
        specs.append(AnnotatorSpec(name, scope, selector, dictionary, patterns))
    return specs
