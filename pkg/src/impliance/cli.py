"""Command-line interface mirroring the gateway endpoints.

One-shot verbs build the appliance from a config file, perform the request,
and print a JSON (or plain text) result; `serve` keeps the process running
behind the HTTP gateway.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ApplianceConfig, load_config
from .engine import Engine
from .errors import ApplianceError
from .gateway import _doc_json, encode_value
from .model import DocId, SourceFormat
from .planner import SearchRequest
from .query import DrillState
from .workload import metrics_report, run_script


def _build_engine(args) -> Engine:
    config = load_config(args.config) if args.config else ApplianceConfig()
    return Engine(config)


def _cmd_serve(args) -> int:
    from .gateway import serve

    serve(args.config, host=args.host, port=args.port)
    return 0


def _cmd_ingest(args) -> int:
    engine = _build_engine(args)
    payload = sys.stdin.buffer.read() if args.file == "-" else open(args.file, "rb").read()
    doc_id, version = engine.ingest(payload, SourceFormat(args.format))
    print(json.dumps({"id": str(doc_id), "version": version}))
    return 0


def _run_search(engine: Engine, args) -> DrillState:
    request = SearchRequest(terms=args.term or [], k=args.k, facets=args.facet or [])
    return DrillState(request)


def _print_result(engine: Engine, state: DrillState) -> None:
    result = engine.search(state.effective_request())
    print(json.dumps({
        "state": state.serialize(),
        "total": result.total,
        "hits": [{"id": str(d), "version": v, "score": s} for d, v, s in result.hits],
        "facets": {
            path: [{"value": encode_value(f.value), "count": f.count} for f in values]
            for path, values in result.facet_counts.items()
        },
    }, indent=2))


def _cmd_search(args) -> int:
    engine = _build_engine(args)
    _ingest_corpus(engine, args)
    _print_result(engine, _run_search(engine, args))
    return 0


def _cmd_drill(args) -> int:
    engine = _build_engine(args)
    _ingest_corpus(engine, args)
    state = DrillState.deserialize(sys.stdin.read())
    state = state.drill_down(args.facet, args.value)
    _print_result(engine, state)
    return 0


def _cmd_aggregate(args) -> int:
    engine = _build_engine(args)
    _ingest_corpus(engine, args)
    groups = engine.aggregate(
        SearchRequest(terms=args.term or []), args.group_by, args.measure, args.fn
    )
    print(json.dumps({
        "groups": [{"value": encode_value(v), "result": encode_value(r)} for v, r in groups]
    }, indent=2))
    return 0


def _cmd_connect(args) -> int:
    engine = _build_engine(args)
    _ingest_corpus(engine, args)
    paths = engine.connection_query(DocId.parse(args.a), DocId.parse(args.b), args.max_hops)
    print(json.dumps({
        "paths": [[{"id": str(d), "relation": r} for d, r in p] for p in paths]
    }, indent=2))
    return 0


def _cmd_topo(args) -> int:
    engine = _build_engine(args)
    fabric = engine.fabric
    print(json.dumps({
        "nodes": [
            {"id": n.node_id, "flavor": n.flavor.value, "state": n.state.value}
            for n in sorted(fabric.nodes.values(), key=lambda n: n.node_id)
        ],
        "groups": [
            {"id": g.group_id, "members": sorted(g.members), "leader": g.leader}
            for g in fabric.groups
        ],
    }, indent=2))
    return 0


def _cmd_simulate(args) -> int:
    config = load_config(args.config) if args.config else ApplianceConfig()
    with open(args.script) as fh:
        script = fh.read()
    _engine, report = run_script(script, config=config, seed=args.seed)
    print(report, end="")
    return 0


def _ingest_corpus(engine: Engine, args) -> None:
    """One-shot verbs can pre-load a workload script before querying."""
    if getattr(args, "load", None):
        with open(args.load) as fh:
            run_script(fh.read(), engine=engine, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impliance")
    parser.add_argument("--config", help="path to the appliance config file")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("ingest", help="ingest one payload")
    p.add_argument("file", help="payload file, or - for stdin")
    p.add_argument("--format", default="plain_text",
                   choices=[f.value for f in SourceFormat])
    p.set_defaults(fn=_cmd_ingest)

    def query_args(p):
        p.add_argument("--load", help="workload script to run before the query")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("search", help="keyword / faceted search")
    p.add_argument("term", nargs="*")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--facet", action="append")
    query_args(p)
    p.set_defaults(fn=_cmd_search)

    p = sub.add_parser("drill", help="apply a drill-down to a serialized state from stdin")
    p.add_argument("facet")
    p.add_argument("value")
    query_args(p)
    p.set_defaults(fn=_cmd_drill)

    p = sub.add_parser("aggregate", help="grouped aggregate over matching documents")
    p.add_argument("--term", action="append")
    p.add_argument("--group-by", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--fn", default="count", choices=["count", "sum", "min", "max", "avg"])
    query_args(p)
    p.set_defaults(fn=_cmd_aggregate)

    p = sub.add_parser("connect", help="shortest connection paths between two documents")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--max-hops", type=int, default=6)
    query_args(p)
    p.set_defaults(fn=_cmd_connect)

    p = sub.add_parser("topo", help="print the simulated topology")
    p.set_defaults(fn=_cmd_topo)

    p = sub.add_parser("simulate", help="run a workload script and print the metrics report")
    p.add_argument("script")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ApplianceError as exc:
        print(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
