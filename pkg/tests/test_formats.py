"""Source-format mapping onto the native tree model."""
from __future__ import annotations

import json

import pytest

from impliance.formats import (
    ParseError,
    parse_delimited,
    parse_json_like,
    parse_payload,
    parse_plain_text,
    parse_relational_row,
    parse_xml_like,
)
from impliance.model import DocId, DocNode, Kind, SourceFormat, UniversalDocument, extract_paths


def _paths(root: DocNode):
    doc = UniversalDocument(DocId(1, 1), 1, Kind.BASE, SourceFormat.JSON_LIKE, root, ingested_at=1)
    return [(e.path, e.value) for e in extract_paths(doc)]


def _oracle_delimited(line: str):
    """Hand-written single-line delimited parser used as an oracle."""
    fields = line.split(",")
    out = []
    for i, field in enumerate(fields):
        try:
            value = int(field)
        except ValueError:
            try:
                value = float(field)
            except ValueError:
                value = field
        out.append((f"/record/field_{i + 1}", value))
    return out


class TestRelationalRow:
    def test_paper_example_shape(self):
        raw = json.dumps({"schema": {"id": "int", "name": "text"},
                          "row": {"id": 7, "name": "Ada"}}).encode()
        root = parse_relational_row(raw)
        assert root.label == "row"
        assert _paths(root) == [("/row/id", 7), ("/row/name", "Ada")]

    def test_missing_column_becomes_null_leaf(self):
        raw = json.dumps({"schema": {"id": "int", "name": "text"}, "row": {"id": 1}}).encode()
        assert _paths(parse_relational_row(raw)) == [("/row/id", 1), ("/row/name", None)]

    def test_type_mismatch_rejected(self):
        raw = json.dumps({"schema": {"id": "int"}, "row": {"id": "seven"}}).encode()
        with pytest.raises(ParseError):
            parse_relational_row(raw)

    def test_malformed_json_reports_position(self):
        with pytest.raises(ParseError) as excinfo:
            parse_relational_row(b'{"schema": }')
        assert excinfo.value.position > 0


class TestDelimited:
    def test_three_fields_three_leaf_paths(self):
        line = "7,Ada,3.5"
        root = parse_delimited(line.encode())
        assert _paths(root) == _oracle_delimited(line)
        assert len(_paths(root)) == 3

    def test_header_line_names_fields(self):
        root = parse_delimited(b"id,name\n7,Ada")
        assert _paths(root) == [("/record/id", 7), ("/record/name", "Ada")]

    def test_field_count_mismatch_rejected(self):
        with pytest.raises(ParseError):
            parse_delimited(b"a,b\n1,2,3")

    def test_empty_payload_rejected(self):
        with pytest.raises(ParseError):
            parse_delimited(b"")


class TestJsonLike:
    def test_arrays_become_repeated_siblings(self):
        raw = json.dumps({"tags": ["a", "b"]}).encode()
        assert _paths(parse_json_like(raw)) == [("/json/tags", "a"), ("/json/tags", "b")]

    def test_null_becomes_valueless_leaf(self):
        assert _paths(parse_json_like(b'{"x": null}')) == [("/json/x", None)]

    def test_nested_objects(self):
        raw = json.dumps({"a": {"b": 1}}).encode()
        assert _paths(parse_json_like(raw)) == [("/json/a/b", 1)]


class TestXmlLike:
    def test_attributes_become_at_children(self):
        root = parse_xml_like(b'<doc id="4"><title>Hi</title></doc>')
        assert _paths(root) == [("/doc/@id", "4"), ("/doc/title", "Hi")]

    def test_invalid_xml_rejected_with_position(self):
        with pytest.raises(ParseError):
            parse_xml_like(b"<doc><open></doc>")


class TestPlainText:
    def test_empty_document_is_valid(self):
        root = parse_plain_text(b"")
        assert root.label == "text" and root.value == ""

    def test_non_utf8_rejected(self):
        with pytest.raises(ParseError):
            parse_plain_text(b"\xff\xfe")


def test_dispatcher_covers_every_format():
    samples = {
        SourceFormat.RELATIONAL_ROW: json.dumps({"schema": {"a": "int"}, "row": {"a": 1}}).encode(),
        SourceFormat.DELIMITED: b"1,2",
        SourceFormat.JSON_LIKE: b'{"a": 1}',
        SourceFormat.XML_LIKE: b"<a>1</a>",
        SourceFormat.PLAIN_TEXT: b"one",
    }
    for fmt, raw in samples.items():
        assert parse_payload(raw, fmt) is not None
