"""HTTP gateway: endpoint contracts and error-code fidelity."""
from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from impliance.gateway import create_app
from impliance.model import SourceFormat

from conftest import make_engine, mixed_corpus


@pytest.fixture
def client():
    engine = make_engine()
    return TestClient(create_app(engine)), engine


def _seed(client_pair, n=18):
    client, engine = client_pair
    mixed_corpus(engine, n, seed=12)
    client.post("/admin/quiesce", json={"target": "all"})
    return client, engine


class TestDocuments:
    def test_ingest_and_fetch_round_trip(self, client):
        client, _engine = client
        response = client.post("/docs", json={"format": "plain_text",
                                              "payload": "hello gateway"})
        assert response.status_code == 200
        doc = response.json()
        fetched = client.get(f"/docs/{doc['id']}").json()
        assert fetched["version"] == doc["version"] == 1
        assert fetched["root"]["value"] == "hello gateway"
        assert fetched["kind"] == "base"

    def test_unknown_format_is_400(self, client):
        client, _ = client
        response = client.post("/docs", json={"format": "csv", "payload": "x"})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "invalid_request"

    def test_parse_error_is_400_with_code(self, client):
        client, _ = client
        response = client.post("/docs", json={"format": "json_like",
                                              "payload": "{broken"})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "parse_error"

    def test_unknown_doc_is_404(self, client):
        client, _ = client
        response = client.get("/docs/1-999")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_doc"

    def test_unknown_version_is_404(self, client):
        client, _ = client
        doc = client.post("/docs", json={"format": "plain_text", "payload": "x"}).json()
        response = client.get(f"/docs/{doc['id']}", params={"version": 5})
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_version"


class TestSearch:
    def test_search_body_and_state_agree(self, client):
        client, _engine = _seed(client)
        direct = client.post("/search", json={"terms": ["alpha"], "k": 5}).json()
        via_state = client.post("/search", json={"state": direct["state"]}).json()
        assert via_state == direct

    def test_drill_round_trip_is_byte_identical(self, client):
        client, _engine = _seed(client)
        base = client.post("/search", json={
            "terms": [], "k": 5, "facets": ["/json/region"],
        }).json()
        facet_values = base["facets"]["/json/region"]
        assert facet_values, "corpus has json documents with regions"
        down = client.post("/drill", json={
            "state": base["state"], "action": "down",
            "facet": "/json/region", "value": facet_values[0]["value"],
        }).json()
        assert down["constraints"] == [
            {"path": "/json/region", "value": facet_values[0]["value"]}
        ]
        assert down["total"] == facet_values[0]["count"]
        removed = client.post("/drill", json={
            "state": down["state"], "action": "remove", "facet": "/json/region",
        }).json()
        assert removed["state"] == base["state"]
        assert removed["total"] == base["total"]

    def test_drill_unknown_action_rejected(self, client):
        client, _engine = _seed(client, n=3)
        base = client.post("/search", json={"terms": []}).json()
        response = client.post("/drill", json={"state": base["state"],
                                               "action": "sideways"})
        assert response.status_code == 400

    def test_aggregate_endpoint(self, client):
        client, engine = _seed(client)
        response = client.post("/aggregate", json={
            "terms": [], "group_by": "/json/region", "measure": "/json/amount",
            "fn": "sum",
        })
        assert response.status_code == 200
        groups = response.json()["groups"]
        assert groups and all({"value", "result"} <= set(g) for g in groups)


class TestViewsAndConnect:
    def test_view_register_and_query(self, client):
        client, _engine = _seed(client)
        client.post("/views", json={"name": "orders", "columns": [
            {"name": "id", "path": "/row/id"}, {"name": "amount", "path": "/row/amount"},
        ]})
        response = client.post("/views/orders/query", json={
            "selection": [{"column": "amount", "comparator": ">", "value": 10.0}],
            "projection": ["id"],
        })
        assert response.status_code == 200
        assert all(len(row) == 1 for row in response.json()["rows"])

    def test_unknown_view_is_404(self, client):
        client, _ = client
        response = client.post("/views/ghost/query", json={})
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_view"

    def test_connect_validates_documents(self, client):
        client, _engine = _seed(client, n=4)
        response = client.get("/connect", params={"a": "1-1", "b": "1-999"})
        assert response.status_code == 404


class TestAdmin:
    def test_topology_reflects_failures(self, client):
        client, engine = _seed(client, n=6)
        before = client.get("/topology").json()
        assert [n["id"] for n in before["nodes"]] == sorted(engine.fabric.nodes)
        client.delete("/admin/nodes/2")
        client.post("/admin/quiesce", json={"target": "repair"})
        after = client.get("/topology").json()
        node2 = next(n for n in after["nodes"] if n["id"] == 2)
        assert node2["state"] == "failed"
        assert node2["suspected"] is True
        assert after["clock"] == engine.fabric.clock

    def test_join_node(self, client):
        client, engine = client
        response = client.post("/admin/nodes", json={"flavor": "grid"})
        node_id = response.json()["id"]
        assert node_id in engine.fabric.live_nodes(engine.fabric.nodes[node_id].flavor)

    def test_bad_quiesce_target(self, client):
        client, _ = client
        assert client.post("/admin/quiesce", json={"target": "warp"}).status_code == 400

    def test_metrics_is_plain_text(self, client):
        client, _engine = _seed(client, n=3)
        response = client.get("/metrics")
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/plain")
        assert "interactive_latency" in response.text


class TestValueEncoding:
    def test_timestamp_round_trip(self, client):
        client, engine = client
        # Delimited records carry timestamp-typed fields end to end.
        payload = json.dumps({
            "schema": {"id": "int", "when": "timestamp"},
            "row": {"id": 1, "when": 1700000000},
        })
        doc = client.post("/docs", json={"format": "relational_row",
                                         "payload": payload}).json()
        fetched = client.get(f"/docs/{doc['id']}").json()
        children = fetched["root"]["children"]
        when = next(c for c in children if c["label"] == "when")
        assert when["value"] == {"@ts": 1700000000}
