"""Search results, drill-down state, and value comparison semantics.

DrillState is pure data: reapplying its constraints to its base request must
reproduce the same result, and its serialization is canonical ordered text so
state equality is byte comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import InvalidRequest
from .model import DocId, Timestamp, TypedValue, VersionId, value_sort_key
from .planner import SearchRequest, StructuralPredicate


@dataclass
class FacetValue:
    value: TypedValue
    count: int


@dataclass
class SearchResult:
    hits: list[tuple[DocId, VersionId, float]]
    facet_counts: dict[str, list[FacetValue]]
    total: int


def compare_values(left: TypedValue, comparator: str, right: TypedValue) -> bool:
    """Typed comparison; cross-type comparisons (other than int/float) never match."""
    if isinstance(left, bool) != isinstance(right, bool):
        return False
    if isinstance(left, Timestamp) != isinstance(right, Timestamp):
        return False
    if isinstance(left, Timestamp):
        lv, rv = left.value, right.value
    elif isinstance(left, (int, float)) and isinstance(right, (int, float)):
        lv, rv = float(left), float(right)
    elif isinstance(left, str) and isinstance(right, str):
        lv, rv = left, right
    else:
        return False
    if comparator == "=":
        return lv == rv
    if comparator == "<":
        return lv < rv
    if comparator == "<=":
        return lv <= rv
    if comparator == ">":
        return lv > rv
    if comparator == ">=":
        return lv >= rv
    raise InvalidRequest(f"unknown comparator {comparator!r}")


# -- drill state ------------------------------------------------------------

def _encode_value(value: TypedValue) -> str:
    if isinstance(value, bool):
        return "b:" + ("true" if value else "false")
    if isinstance(value, int):
        return f"i:{value}"
    if isinstance(value, float):
        return f"d:{value!r}"
    if isinstance(value, Timestamp):
        return f"t:{value.value}"
    return "s:" + value.replace("\\", "\\\\").replace("|", "\\p").replace("\n", "\\n")


def _decode_value(text: str) -> TypedValue:
    tag, _, body = text.partition(":")
    if tag == "b":
        return body == "true"
    if tag == "i":
        return int(body)
    if tag == "d":
        return float(body)
    if tag == "t":
        return Timestamp(int(body))
    if tag == "s":
        return body.replace("\\n", "\n").replace("\\p", "|").replace("\\\\", "\\")
    raise InvalidRequest(f"bad value encoding {text!r}")


@dataclass
class DrillState:
    base: SearchRequest
    constraints: list[tuple[str, TypedValue]] = field(default_factory=list)

    def effective_request(self) -> SearchRequest:
        """Base request plus every applied drill constraint."""
        return replace(
            self.base,
            constraints=list(self.base.constraints) + list(self.constraints),
            terms=list(self.base.terms),
            structural=list(self.base.structural),
            facets=list(self.base.facets),
        )

    def drill_down(self, facet: str, value: TypedValue) -> "DrillState":
        if facet not in self.base.facets:
            raise InvalidRequest(f"facet {facet!r} was not requested in this state")
        kept = [(p, v) for p, v in self.constraints if p != facet]
        return DrillState(self.base, kept + [(facet, value)])

    def drill_across(self, facets: list[str]) -> "DrillState":
        """Swap the facet list while keeping all applied constraints."""
        return DrillState(replace(self.base, facets=list(facets),
                                  terms=list(self.base.terms),
                                  structural=list(self.base.structural),
                                  constraints=list(self.base.constraints)),
                          list(self.constraints))

    def remove_constraint(self, facet: str) -> "DrillState":
        return DrillState(self.base, [(p, v) for p, v in self.constraints if p != facet])

    def serialize(self) -> str:
        lines = [f"k={self.base.k}"]
        for term in self.base.terms:
            lines.append(f"term={term}")
        for pred in self.base.structural:
            lines.append(f"struct={pred.path}|{pred.comparator}|{_encode_value(pred.value)}")
        for path, value in self.base.constraints:
            lines.append(f"base_constraint={path}|{_encode_value(value)}")
        for path in self.base.facets:
            lines.append(f"facet={path}")
        if self.base.join_annotations:
            lines.append("join_annotations=1")
        if self.base.persist_as:
            lines.append(f"persist_as={self.base.persist_as}")
        for path, value in self.constraints:
            lines.append(f"constraint={path}|{_encode_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "DrillState":
        base = SearchRequest(terms=[], k=1)
        base.k = 10
        constraints: list[tuple[str, TypedValue]] = []
        # Split on '\n' only: it is the one separator the value encoding
        # escapes, so other control characters survive inside a line.
        for raw in text.split("\n"):
            if not raw.strip():
                continue
            key, _, body = raw.partition("=")
            if key == "k":
                base.k = int(body)
            elif key == "term":
                base.terms.append(body)
            elif key == "struct":
                path, comparator, value = body.split("|", 2)
                base.structural.append(StructuralPredicate(path, comparator, _decode_value(value)))
            elif key == "base_constraint":
                path, value = body.split("|", 1)
                base.constraints.append((path, _decode_value(value)))
            elif key == "facet":
                base.facets.append(body)
            elif key == "join_annotations":
                base.join_annotations = body == "1"
            elif key == "persist_as":
                base.persist_as = body
            elif key == "constraint":
                path, value = body.split("|", 1)
                constraints.append((path, _decode_value(value)))
            else:
                raise InvalidRequest(f"unknown drill-state line {raw!r}")
        if base.k < 1:
            raise InvalidRequest("result limit k must be >= 1")
        return cls(base, constraints)


def facet_order_key(item: FacetValue) -> tuple:
    return (-item.count, value_sort_key(item.value))
