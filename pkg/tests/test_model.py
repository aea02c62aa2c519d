"""Document model: serialization round trips, path extraction, value order."""
from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impliance.model import (
    DocId,
    DocNode,
    Kind,
    Lineage,
    Reference,
    SourceFormat,
    Timestamp,
    UniversalDocument,
    content_hash,
    deserialize_document,
    extract_paths,
    fnv1a64,
    serialize_document,
    tree_depth,
    value_sort_key,
)

_values = st.one_of(
    st.booleans(),
    st.integers(min_value=-(2**40), max_value=2**40),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.text(max_size=20),
    st.builds(Timestamp, st.integers(min_value=0, max_value=2**40)),
)

_labels = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")), min_size=1, max_size=8
)


def _nodes(depth: int):
    if depth <= 0:
        return st.builds(DocNode, _labels, st.one_of(st.none(), _values), st.just([]))
    return st.builds(
        DocNode,
        _labels,
        st.one_of(st.none(), _values),
        st.lists(_nodes(depth - 1), max_size=3),
    )


def _doc(root: DocNode) -> UniversalDocument:
    return UniversalDocument(DocId(1, 1), 1, Kind.BASE, SourceFormat.JSON_LIKE, root, ingested_at=7)


class TestDocId:
    def test_string_round_trip(self):
        assert DocId.parse(str(DocId(3, 99))) == DocId(3, 99)

    def test_total_order_is_lexicographic(self):
        assert DocId(1, 9) < DocId(2, 1)
        assert DocId(2, 1) < DocId(2, 2)


class TestInvariants:
    def test_annotation_requires_references(self):
        with pytest.raises(ValueError):
            UniversalDocument(DocId(1, 1), 1, Kind.ANNOTATION, SourceFormat.JSON_LIKE, DocNode("a"))

    def test_derived_requires_lineage(self):
        with pytest.raises(ValueError):
            UniversalDocument(DocId(1, 1), 1, Kind.DERIVED, SourceFormat.JSON_LIKE, DocNode("a"))

    def test_version_must_be_positive(self):
        with pytest.raises(ValueError):
            UniversalDocument(DocId(1, 1), 0, Kind.BASE, SourceFormat.JSON_LIKE, DocNode("a"))

    def test_empty_label_rejected(self):
        with pytest.raises(ValueError):
            DocNode("")


class TestSerialization:
    def test_known_document_round_trip(self):
        root = DocNode("row", None, [
            DocNode("id", 7),
            DocNode("name", "Ada"),
            DocNode("flags", None, [DocNode("active", True), DocNode("score", 1.5)]),
            DocNode("seen", Timestamp(42)),
        ])
        doc = UniversalDocument(
            DocId(2, 5), 3, Kind.ANNOTATION, SourceFormat.XML_LIKE, root,
            references=[Reference(DocId(1, 1), 2, "annotates")],
            lineage=Lineage("extractor", ((DocId(1, 1), 2),)),
            ingested_at=99,
        )
        assert deserialize_document(serialize_document(doc)) == doc

    @settings(max_examples=60, deadline=None)
    @given(_nodes(3))
    def test_round_trip_property(self, root):
        doc = _doc(root)
        assert deserialize_document(serialize_document(doc)) == doc

    def test_hash_changes_with_content(self):
        a = serialize_document(_doc(DocNode("x", 1)))
        b = serialize_document(_doc(DocNode("x", 2)))
        assert content_hash(a) != content_hash(b)

    def test_fnv_reference_vector(self):
        # Standard FNV-1a 64-bit test vectors.
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


def _oracle_paths(root: DocNode):
    """Independent recursive traversal used as the extract_paths oracle."""
    out = []
    seen: dict[str, int] = {}

    def walk(node, prefix):
        path = f"{prefix}/{node.label}"
        if node.value is not None or not node.children:
            out.append((path, node.value, seen.get(path, 0)))
            seen[path] = seen.get(path, 0) + 1
        for child in node.children:
            walk(child, path)

    walk(root, "")
    return out


class TestExtractPaths:
    def test_repeated_siblings_get_positions(self):
        root = DocNode("list", None, [DocNode("item", "a"), DocNode("item", "b")])
        entries = extract_paths(_doc(root))
        assert [(e.path, e.value, e.position) for e in entries] == [
            ("/list/item", "a", 0),
            ("/list/item", "b", 1),
        ]

    def test_valued_inner_node_is_included(self):
        root = DocNode("a", "v", [DocNode("b", 1)])
        paths = [e.path for e in extract_paths(_doc(root))]
        assert paths == ["/a", "/a/b"]

    @settings(max_examples=60, deadline=None)
    @given(_nodes(3))
    def test_matches_recursive_oracle(self, root):
        entries = extract_paths(_doc(root))
        assert [(e.path, e.value, e.position) for e in entries] == _oracle_paths(root)


class TestValueOrder:
    def test_type_groups(self):
        ordered = sorted([Timestamp(1), "a", 2, True], key=value_sort_key)
        assert ordered == [True, 2, "a", Timestamp(1)]

    @settings(max_examples=80, deadline=None)
    @given(st.lists(_values, min_size=2, max_size=6))
    def test_total_order(self, values):
        keys = [value_sort_key(v) for v in values]
        assert sorted(keys) == sorted(sorted(keys))  # comparable without error

    def test_bool_not_confused_with_int(self):
        assert value_sort_key(True) != value_sort_key(1)


def test_tree_depth():
    deep = DocNode("a", None, [DocNode("b", None, [DocNode("c", 1)])])
    assert tree_depth(deep) == 3
    assert tree_depth(DocNode("x")) == 1
