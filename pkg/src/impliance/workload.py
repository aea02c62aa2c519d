"""Workload scripts and the metrics report.

Script grammar (line-oriented, '#' starts a comment):

    INGEST <n> FROM <generator>     ingest n generated documents
    QUERY <term> ... [k=<n>] [facet=<path>] ...
    FAIL <node_id>                  fail a simulated node
    JOIN <flavor> [<capacity>]      add a node (data | grid | cluster)
    WAIT <ticks>                    advance the virtual clock
    QUIESCE [index|pipeline|repair|all]

Generators are seeded: the same (config, script, seed) reproduces every
document, every trace record, and therefore every byte of the report.
"""
from __future__ import annotations

import json
import random
from typing import Callable, Optional

from .config import ApplianceConfig
from .engine import Engine
from .errors import ScriptError
from .fabric import Flavor, TRACE_HEADER
from .model import SourceFormat
from .planner import SearchRequest

_WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima "
    "mike november oscar papa quebec romeo sierra tango uniform victor whiskey "
    "xray yankee zulu amber basalt cobalt dune ember flint garnet"
).split()

_NAMES = ("Grace Hopper", "Ada Lovelace", "Alan Turing", "Edgar Codd", "Jim Gray")
_REGIONS = ("north", "south", "east", "west")


def _gen_uniform(rng: random.Random, i: int) -> tuple[bytes, SourceFormat]:
    words = [rng.choice(_WORDS) for _ in range(12)]
    return (" ".join(words)).encode(), SourceFormat.PLAIN_TEXT


def _gen_relational(rng: random.Random, i: int) -> tuple[bytes, SourceFormat]:
    payload = {
        "schema": {"id": "int", "name": "text", "amount": "decimal"},
        "row": {"id": i, "name": rng.choice(_WORDS), "amount": round(rng.uniform(0, 100), 3)},
    }
    return json.dumps(payload, sort_keys=True).encode(), SourceFormat.RELATIONAL_ROW


def _gen_json(rng: random.Random, i: int) -> tuple[bytes, SourceFormat]:
    payload = {
        "title": " ".join(rng.choice(_WORDS) for _ in range(3)),
        "region": rng.choice(_REGIONS),
        "amount": rng.randint(1, 500),
    }
    return json.dumps(payload, sort_keys=True).encode(), SourceFormat.JSON_LIKE


def _gen_entities(rng: random.Random, i: int) -> tuple[bytes, SourceFormat]:
    name = rng.choice(_NAMES)
    words = " ".join(rng.choice(_WORDS) for _ in range(6))
    return f"{name} filed a report about {words}".encode(), SourceFormat.PLAIN_TEXT


GENERATORS: dict[str, Callable[[random.Random, int], tuple[bytes, SourceFormat]]] = {
    "uniform": _gen_uniform,
    "relational": _gen_relational,
    "json": _gen_json,
    "entities": _gen_entities,
}

_FLAVORS = {"data": Flavor.DATA, "grid": Flavor.GRID, "cluster": Flavor.CLUSTER}


def parse_script(text: str) -> list[tuple[int, list[str]]]:
    """Split a script into (line number, tokens) steps; raises ScriptError."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        verb = tokens[0].upper()
        if verb == "INGEST":
            if len(tokens) != 4 or tokens[2].upper() != "FROM":
                raise ScriptError(lineno, f"expected 'INGEST <n> FROM <generator>', got {line!r}")
            if not tokens[1].isdigit():
                raise ScriptError(lineno, f"INGEST count must be an integer, got {tokens[1]!r}")
            if tokens[3] not in GENERATORS:
                raise ScriptError(lineno, f"unknown generator {tokens[3]!r}")
        elif verb == "QUERY":
            pass
        elif verb == "FAIL":
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise ScriptError(lineno, f"expected 'FAIL <node_id>', got {line!r}")
        elif verb == "JOIN":
            if len(tokens) not in (2, 3) or tokens[1].lower() not in _FLAVORS:
                raise ScriptError(lineno, f"expected 'JOIN <flavor> [capacity]', got {line!r}")
            if len(tokens) == 3:
                try:
                    float(tokens[2])
                except ValueError:
                    raise ScriptError(lineno, f"JOIN capacity must be a number, got {tokens[2]!r}")
        elif verb == "WAIT":
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise ScriptError(lineno, f"expected 'WAIT <ticks>', got {line!r}")
        elif verb == "QUIESCE":
            if len(tokens) == 2 and tokens[1].lower() not in ("index", "pipeline", "repair", "all"):
                raise ScriptError(lineno, f"unknown quiesce target {tokens[1]!r}")
            if len(tokens) > 2:
                raise ScriptError(lineno, f"expected 'QUIESCE [target]', got {line!r}")
        else:
            raise ScriptError(lineno, f"unknown verb {tokens[0]!r}")
        steps.append((lineno, [verb] + tokens[1:]))
    return steps


def _parse_query(tokens: list[str], lineno: int) -> SearchRequest:
    terms: list[str] = []
    k = 10
    facets: list[str] = []
    for token in tokens:
        if token.startswith("k="):
            try:
                k = int(token[2:])
            except ValueError:
                raise ScriptError(lineno, f"bad k value {token!r}")
        elif token.startswith("facet="):
            facets.append(token[len("facet="):])
        else:
            terms.append(token)
    return SearchRequest(terms=terms, k=k, facets=facets)


def run_script(
    text: str,
    engine: Optional[Engine] = None,
    config: Optional[ApplianceConfig] = None,
    seed: int = 0,
) -> tuple[Engine, str]:
    """Execute a script and return (engine, metrics report)."""
    steps = parse_script(text)
    if engine is None:
        engine = Engine(config)
    rng = random.Random(seed)
    counter = 0
    for lineno, tokens in steps:
        verb = tokens[0]
        if verb == "INGEST":
            n, generator = int(tokens[1]), GENERATORS[tokens[3]]
            for _ in range(n):
                counter += 1
                raw, fmt = generator(rng, counter)
                engine.ingest(raw, fmt)
        elif verb == "QUERY":
            engine.search(_parse_query(tokens[1:], lineno))
        elif verb == "FAIL":
            engine.fail_node(int(tokens[1]))
        elif verb == "JOIN":
            capacity = float(tokens[2]) if len(tokens) == 3 else None
            engine.join_node(_FLAVORS[tokens[1].lower()], capacity)
        elif verb == "WAIT":
            deadline = engine.fabric.clock + int(tokens[1])
            engine.fabric.run_until(lambda: engine.fabric.clock >= deadline)
        elif verb == "QUIESCE":
            target = tokens[1].lower() if len(tokens) == 2 else "all"
            if target == "index":
                engine.quiesce_index()
            elif target == "pipeline":
                engine.quiesce_pipeline()
            elif target == "repair":
                engine.quiesce_repair()
            else:
                engine.quiesce_all()
    return engine, metrics_report(engine)


def _percentile(sorted_values: list[int], fraction: float) -> int:
    if not sorted_values:
        return 0
    index = min(len(sorted_values) - 1, int(fraction * len(sorted_values)))
    return sorted_values[index]


def metrics_report(engine: Engine) -> str:
    """Columnar text summary of the run; byte-stable for identical runs."""
    fabric = engine.fabric
    lines = []
    lines.append(f"clock {fabric.clock}")
    lines.append(f"documents {len(engine.store.latest)}")
    lines.append("")
    lines.append("node  flavor   state   tasks     busy       work    bytes_out")
    per_node: dict[int, list] = {}
    for record in fabric.trace:
        stats = per_node.setdefault(record.node, [0, 0, 0.0, 0])
        stats[0] += 1
        stats[1] += record.end - record.start
        stats[2] += record.work
        stats[3] += record.bytes_out
    for node_id in sorted(fabric.nodes):
        node = fabric.nodes[node_id]
        tasks, busy, work, bytes_out = per_node.get(node_id, [0, 0, 0.0, 0])
        lines.append(
            f"{node_id:4d}  {node.flavor.value:7s} {node.state.value:7s} "
            f"{tasks:6d} {busy:8d} {work:10.2f} {bytes_out:12d}"
        )
    lines.append("")
    lines.append("flavor    tasks       work")
    flavor_stats: dict[str, list] = {}
    for record in fabric.trace:
        stats = flavor_stats.setdefault(record.node_flavor, [0, 0.0])
        stats[0] += 1
        stats[1] += record.work
    for flavor in ("data", "grid", "cluster"):
        tasks, work = flavor_stats.get(flavor, [0, 0.0])
        lines.append(f"{flavor:8s} {tasks:6d} {work:10.2f}")
    lines.append("")
    latencies = sorted(fabric.interactive_latencies)
    lines.append(
        "interactive_latency "
        f"count={len(latencies)} "
        f"p50={_percentile(latencies, 0.50)} "
        f"p95={_percentile(latencies, 0.95)} "
        f"p99={_percentile(latencies, 0.99)} "
        f"max={latencies[-1] if latencies else 0}"
    )
    lines.append("")
    lines.append("transfers")
    for entry in engine.steward.ledger.transfer_log:
        lines.append(entry)
    lines.append("")
    return "\n".join(lines) + "\n"


def trace_text(engine: Engine) -> str:
    return "\n".join([TRACE_HEADER] + [r.line() for r in engine.fabric.trace]) + "\n"
