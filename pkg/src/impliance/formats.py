"""Mapping of the five supported source formats onto the native tree model.

One mapping rule per format, lossless for the formats in scope:
  * relational_row  -> one-level "row" tree, one child per column
  * delimited       -> "record" tree, one child per field (optional header line)
  * json_like       -> structural mapping; arrays become repeated siblings
  * xml_like        -> elements become nodes, attributes become "@name" children
  * plain_text      -> single "text" node holding the whole payload
"""
from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from typing import Any

from .model import DocNode, SourceFormat, Timestamp, TypedValue


class ParseError(ValueError):
    """Raised when a payload cannot be parsed in its declared format."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position


_SCHEMA_TYPES = {
    "int": int,
    "integer": int,
    "decimal": float,
    "float": float,
    "text": str,
    "string": str,
    "bool": bool,
    "boolean": bool,
    "timestamp": Timestamp,
}


def _coerce(value: Any, type_name: str, column: str) -> TypedValue:
    py_type = _SCHEMA_TYPES.get(type_name.lower())
    if py_type is None:
        raise ParseError(f"unknown column type {type_name!r} for column {column!r}")
    if py_type is bool:
        if isinstance(value, bool):
            return value
        raise ParseError(f"column {column!r}: expected boolean, got {value!r}")
    if py_type is int and isinstance(value, bool):
        raise ParseError(f"column {column!r}: expected integer, got boolean")
    if py_type is Timestamp:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"column {column!r}: expected integer epoch, got {value!r}")
        return Timestamp(value)
    try:
        return py_type(value)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"column {column!r}: {exc}") from exc


def parse_relational_row(raw: bytes) -> DocNode:
    """Payload: JSON {"schema": {col: type, ...}, "row": {col: value, ...}}."""
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"invalid relational_row payload: {exc}", getattr(exc, "pos", 0)) from exc
    if not isinstance(body, dict) or "schema" not in body or "row" not in body:
        raise ParseError("relational_row payload needs 'schema' and 'row' objects")
    schema, row = body["schema"], body["row"]
    if not isinstance(schema, dict) or not isinstance(row, dict):
        raise ParseError("'schema' and 'row' must be objects")
    children = []
    for column, type_name in schema.items():
        if column in row and row[column] is not None:
            children.append(DocNode(column, _coerce(row[column], type_name, column)))
        else:
            children.append(DocNode(column))
    return DocNode("row", None, children)


def _guess_typed(text: str) -> TypedValue:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_delimited(raw: bytes, delimiter: str = ",") -> DocNode:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"delimited payload not utf-8: {exc}", exc.start) from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("delimited payload is empty")
    if len(lines) == 1:
        fields = lines[0].split(delimiter)
        names = [f"field_{i + 1}" for i in range(len(fields))]
        values = fields
    else:
        names = lines[0].split(delimiter)
        values = lines[1].split(delimiter)
        if len(values) != len(names):
            raise ParseError(
                f"delimited record has {len(values)} fields, header has {len(names)}"
            )
    children = [DocNode(n.strip() or f"field_{i + 1}", _guess_typed(v))
                for i, (n, v) in enumerate(zip(names, values))]
    return DocNode("record", None, children)


def _json_to_node(label: str, value: Any) -> list[DocNode]:
    if isinstance(value, dict):
        children: list[DocNode] = []
        for key, item in value.items():
            children.extend(_json_to_node(str(key), item))
        return [DocNode(label, None, children)]
    if isinstance(value, list):
        nodes: list[DocNode] = []
        for item in value:
            nodes.extend(_json_to_node(label, item))
        return nodes
    if value is None:
        return [DocNode(label)]
    if isinstance(value, (str, int, float, bool)):
        return [DocNode(label, value)]
    raise ParseError(f"unsupported json value under {label!r}: {type(value)!r}")


def parse_json_like(raw: bytes) -> DocNode:
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"invalid json payload: {exc}", getattr(exc, "pos", 0)) from exc
    nodes = _json_to_node("json", body)
    if len(nodes) == 1:
        return nodes[0]
    return DocNode("json", None, nodes)  # top-level array: wrap repeated siblings


def _xml_to_node(elem: ET.Element) -> DocNode:
    children = [DocNode("@" + k, v) for k, v in sorted(elem.attrib.items())]
    children.extend(_xml_to_node(c) for c in elem)
    text = (elem.text or "").strip()
    return DocNode(elem.tag, text if text else None, children)


def parse_xml_like(raw: bytes) -> DocNode:
    try:
        root = ET.fromstring(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"xml payload not utf-8: {exc}", exc.start) from exc
    except ET.ParseError as exc:
        raise ParseError(f"invalid xml payload: {exc}", exc.position[1]) from exc
    return _xml_to_node(root)


def parse_plain_text(raw: bytes) -> DocNode:
    try:
        return DocNode("text", raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"text payload not utf-8: {exc}", exc.start) from exc


_PARSERS = {
    SourceFormat.RELATIONAL_ROW: parse_relational_row,
    SourceFormat.DELIMITED: parse_delimited,
    SourceFormat.JSON_LIKE: parse_json_like,
    SourceFormat.XML_LIKE: parse_xml_like,
    SourceFormat.PLAIN_TEXT: parse_plain_text,
}


def parse_payload(raw: bytes, source_format: SourceFormat) -> DocNode:
    """Map a raw payload to its native tree, raising ParseError with position."""
    return _PARSERS[source_format](raw)
