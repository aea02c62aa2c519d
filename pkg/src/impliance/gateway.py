"""HTTP surface of the appliance.

The gateway is a thin, stateless translation layer: every endpoint parses a
request, calls one engine operation, and serializes the result. Errors from
the engine surface 1:1 as {"error": {"code", "message"}} bodies. Typed
values travel as native JSON scalars; timestamps as {"@ts": n}.
"""
from __future__ import annotations

import json
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .config import ApplianceConfig, load_config
from .engine import Engine
from .errors import ApplianceError, InvalidRequest
from .fabric import Flavor
from .model import DocId, DocNode, Kind, SourceFormat, Timestamp, TypedValue, UniversalDocument
from .discovery import entities_of
from .planner import (
    ConnectionRequest,
    SearchRequest,
    StructuralPredicate,
    ViewQuery,
)
from .query import DrillState
from .workload import metrics_report

_STATUS_OF = {
    "parse_error": 400,
    "oversized": 413,
    "unknown_doc": 404,
    "unknown_version": 404,
    "no_live_replica": 503,
    "unknown_view": 404,
    "duplicate_annotator": 409,
    "unknown_path": 404,
    "no_index": 400,
    "invalid_config": 400,
    "invalid_request": 400,
    "scheduling_error": 500,
    "script_error": 400,
}

_FORMATS = {f.value: f for f in SourceFormat}
_FLAVORS = {f.value: f for f in Flavor}


def encode_value(value: Optional[TypedValue]) -> Any:
    if isinstance(value, Timestamp):
        return {"@ts": value.value}
    return value


def decode_value(raw: Any) -> TypedValue:
    if isinstance(raw, dict) and set(raw) == {"@ts"}:
        return Timestamp(int(raw["@ts"]))
    if isinstance(raw, (bool, int, float, str)):
        return raw
    raise InvalidRequest(f"cannot decode value {raw!r}")


def _tree_json(node: DocNode) -> dict:
    out: dict[str, Any] = {"label": node.label}
    if node.value is not None:
        out["value"] = encode_value(node.value)
    if node.children:
        out["children"] = [_tree_json(c) for c in node.children]
    return out


def _doc_json(engine: Engine, doc: UniversalDocument) -> dict:
    body: dict[str, Any] = {
        "id": str(doc.doc_id),
        "version": doc.version,
        "latest": engine.store.latest[doc.doc_id],
        "kind": doc.kind.value,
        "format": doc.source_format.value,
        "ingested_at": doc.ingested_at,
        "root": _tree_json(doc.root),
        "references": [
            {"target": str(r.target_doc), "version": r.target_version, "relation": r.relation}
            for r in doc.references
        ],
    }
    if doc.lineage:
        body["lineage"] = {
            "producer": doc.lineage.producer,
            "inputs": [{"id": str(d), "version": v} for d, v in doc.lineage.inputs],
        }
    annotations = []
    for ann_id, ann_version in engine.annotations_by_base.get(doc.doc_id, []):
        ann = engine.store.get(ann_id, ann_version)
        annotations.append({
            "id": str(ann_id),
            "producer": ann.lineage.producer if ann.lineage else None,
            "entities": [
                {
                    "type": e.entity_type,
                    "text": e.text,
                    "path": e.source_path,
                    "span": [e.span[0], e.span[1]],
                }
                for e in entities_of(ann)
            ],
        })
    body["annotations"] = annotations
    return body


def _search_request(body: dict) -> SearchRequest:
    structural = [
        StructuralPredicate(s["path"], s["comparator"], decode_value(s["value"]))
        for s in body.get("structural", [])
    ]
    constraints = [
        (c["path"], decode_value(c["value"])) for c in body.get("constraints", [])
    ]
    return SearchRequest(
        terms=list(body.get("terms", [])),
        structural=structural,
        constraints=constraints,
        k=int(body.get("k", 10)),
        facets=list(body.get("facets", [])),
        join_annotations=bool(body.get("join_annotations", False)),
        persist_as=body.get("persist_as"),
    )


def _result_json(engine: Engine, state: DrillState) -> dict:
    result = engine.search(state.effective_request())
    return {
        "state": state.serialize(),
        "total": result.total,
        "hits": [
            {"id": str(doc_id), "version": version, "score": score}
            for doc_id, version, score in result.hits
        ],
        "facets": {
            path: [{"value": encode_value(fv.value), "count": fv.count} for fv in values]
            for path, values in result.facet_counts.items()
        },
        "constraints": [
            {"path": path, "value": encode_value(value)} for path, value in state.constraints
        ],
    }


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="impliance", docs_url=None, redoc_url=None)
    app.state.engine = engine

    @app.exception_handler(ApplianceError)
    async def appliance_error(_request: Request, exc: ApplianceError):
        return JSONResponse(
            status_code=_STATUS_OF.get(exc.code, 400),
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    @app.post("/docs")
    async def ingest(request: Request):
        body = await request.json()
        fmt = body.get("format")
        if fmt not in _FORMATS:
            raise InvalidRequest(f"unknown source format {fmt!r}")
        payload = body.get("payload", "")
        doc_id, version = engine.ingest(payload.encode(), _FORMATS[fmt])
        return {"id": str(doc_id), "version": version}

    @app.get("/docs/{doc}")
    async def get_doc(doc: str, version: Optional[int] = None):
        doc_id = DocId.parse(doc)
        return _doc_json(engine, engine.store.get(doc_id, version))

    @app.post("/search")
    async def search(request: Request):
        body = await request.json()
        if "state" in body:
            state = DrillState.deserialize(body["state"])
        else:
            state = DrillState(_search_request(body))
        return _result_json(engine, state)

    @app.post("/drill")
    async def drill(request: Request):
        body = await request.json()
        state = DrillState.deserialize(body["state"])
        action = body.get("action", "down")
        if action == "down":
            state = state.drill_down(body["facet"], decode_value(body["value"]))
        elif action == "across":
            state = state.drill_across(list(body["facets"]))
        elif action == "remove":
            state = state.remove_constraint(body["facet"])
        else:
            raise InvalidRequest(f"unknown drill action {action!r}")
        return _result_json(engine, state)

    @app.post("/aggregate")
    async def aggregate(request: Request):
        body = await request.json()
        if "state" in body:
            base = DrillState.deserialize(body["state"]).effective_request()
        else:
            base = _search_request(body)
        groups = engine.aggregate(base, body["group_by"], body["measure"], body.get("fn", "count"))
        return {
            "groups": [
                {"value": encode_value(value), "result": encode_value(agg)}
                for value, agg in groups
            ]
        }

    @app.get("/connect")
    async def connect(a: str, b: str, max_hops: int = 6):
        paths = engine.connection_query(DocId.parse(a), DocId.parse(b), max_hops)
        return {
            "paths": [
                [{"id": str(doc_id), "relation": relation} for doc_id, relation in path]
                for path in paths
            ]
        }

    @app.post("/views")
    async def register_view(request: Request):
        body = await request.json()
        columns = [(c["name"], c["path"]) for c in body["columns"]]
        engine.register_view(body["name"], columns)
        return {"name": body["name"], "columns": len(columns)}

    @app.post("/views/{name}/query")
    async def query_view(name: str, request: Request):
        body = await request.json()
        selection = [
            (s["column"], s["comparator"], decode_value(s["value"]))
            for s in body.get("selection", [])
        ]
        join = None
        if body.get("join"):
            j = body["join"]
            join = (j["view"], j["left"], j["right"])
        rows = engine.view_query(ViewQuery(name, selection, body.get("projection"), join))
        return {"rows": [[encode_value(cell) for cell in row] for row in rows]}

    @app.get("/topology")
    async def topology():
        fabric = engine.fabric
        return {
            "clock": fabric.clock,
            "nodes": [
                {
                    "id": n.node_id,
                    "flavor": n.flavor.value,
                    "state": n.state.value,
                    "capacity": n.compute_capacity,
                    "suspected": n.node_id in fabric.suspected,
                }
                for n in sorted(fabric.nodes.values(), key=lambda n: n.node_id)
            ],
            "groups": [
                {
                    "id": g.group_id,
                    "members": sorted(g.members),
                    "leader": g.leader,
                    "partitions": sorted(g.partitions),
                }
                for g in fabric.groups
            ],
            "partitions": {str(p): engine.ring.primary_of(p) for p in range(engine.config.cluster.partitions)},
        }

    @app.post("/admin/nodes")
    async def add_node(request: Request):
        body = await request.json()
        flavor = body.get("flavor")
        if flavor not in _FLAVORS:
            raise InvalidRequest(f"unknown flavor {flavor!r}")
        node_id = engine.join_node(_FLAVORS[flavor], body.get("capacity"))
        return {"id": node_id}

    @app.delete("/admin/nodes/{node_id}")
    async def fail_node(node_id: int):
        engine.fail_node(node_id)
        return {"id": node_id, "state": "failed"}

    @app.post("/admin/quiesce")
    async def quiesce(request: Request):
        body = await request.json()
        target = body.get("target", "all")
        if target == "index":
            engine.quiesce_index()
        elif target == "pipeline":
            engine.quiesce_pipeline()
        elif target == "repair":
            engine.quiesce_repair()
        elif target == "all":
            engine.quiesce_all()
        else:
            raise InvalidRequest(f"unknown quiesce target {target!r}")
        return {"target": target, "watermark": engine.indexes.high_watermark}

    @app.get("/metrics")
    async def metrics():
        return PlainTextResponse(metrics_report(engine))

    return app


def serve(config_path: str, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    config = load_config(config_path)
    engine = Engine(config)
    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")
