"""Value comparisons and drill state purity."""
from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impliance.errors import InvalidRequest
from impliance.model import Timestamp
from impliance.planner import SearchRequest, StructuralPredicate
from impliance.query import DrillState, compare_values


class TestCompareValues:
    def test_numeric_cross_type(self):
        assert compare_values(1, "=", 1.0)
        assert compare_values(2, ">", 1.5)

    def test_bool_never_matches_int(self):
        assert not compare_values(True, "=", 1)
        assert not compare_values(1, "=", True)

    def test_timestamp_only_matches_timestamp(self):
        assert compare_values(Timestamp(5), "<", Timestamp(9))
        assert not compare_values(Timestamp(5), "=", 5)

    def test_strings(self):
        assert compare_values("apple", "<", "banana")

    def test_cross_type_string_number(self):
        assert not compare_values("5", "=", 5)

    def test_unknown_comparator(self):
        with pytest.raises(InvalidRequest):
            compare_values(1, "!=", 2)


_drill_values = st.one_of(
    st.booleans(),
    st.integers(min_value=-(2**31), max_value=2**31),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=15),
    st.builds(Timestamp, st.integers(min_value=0, max_value=2**31)),
)


class TestDrillState:
    def _state(self):
        base = SearchRequest(terms=["report"], k=5,
                             structural=[StructuralPredicate("/row/n", ">", 3)],
                             facets=["/row/region", "/row/year"])
        return DrillState(base)

    def test_drill_down_adds_constraint(self):
        state = self._state().drill_down("/row/region", "west")
        assert state.constraints == [("/row/region", "west")]
        request = state.effective_request()
        assert ("/row/region", "west") in request.constraints

    def test_drill_down_replaces_same_facet(self):
        state = self._state().drill_down("/row/region", "west")
        state = state.drill_down("/row/region", "east")
        assert state.constraints == [("/row/region", "east")]

    def test_drill_down_requires_requested_facet(self):
        with pytest.raises(InvalidRequest):
            self._state().drill_down("/row/other", 1)

    def test_drill_across_keeps_constraints(self):
        state = self._state().drill_down("/row/region", "west")
        across = state.drill_across(["/row/year"])
        assert across.base.facets == ["/row/year"]
        assert across.constraints == [("/row/region", "west")]

    def test_remove_constraint_is_undo(self):
        state = self._state().drill_down("/row/region", "west")
        assert state.remove_constraint("/row/region").constraints == []

    def test_base_request_unchanged_by_drilling(self):
        state = self._state()
        before = state.serialize()
        state.drill_down("/row/region", "west")
        assert state.serialize() == before

    def test_serialize_round_trip_known(self):
        state = self._state().drill_down("/row/region", "we|st\nx")
        text = state.serialize()
        back = DrillState.deserialize(text)
        assert back.serialize() == text
        assert back.effective_request() == state.effective_request()

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.text(st.characters(whitelist_categories=("Ll",)),
                                      min_size=1, max_size=8), _drill_values),
                    max_size=4))
    def test_serialize_round_trip_property(self, pairs):
        facets = [f"/f/{name}" for name, _ in pairs]
        base = SearchRequest(terms=["t"], facets=facets)
        state = DrillState(base)
        for (name, value) in pairs:
            state = state.drill_down(f"/f/{name}", value)
        back = DrillState.deserialize(state.serialize())
        assert back.serialize() == state.serialize()
