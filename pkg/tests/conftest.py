"""Shared fixtures and oracle helpers for the test suite."""
from __future__ import annotations

import json
import random

import pytest

from impliance.config import ApplianceConfig
from impliance.engine import Engine
from impliance.model import SourceFormat

WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo "
    "lima mike november oscar papa quebec romeo sierra tango"
).split()

REGIONS = ("north", "south", "east", "west")


def make_engine(**overrides) -> Engine:
    config = ApplianceConfig(**overrides) if overrides else ApplianceConfig()
    return Engine(config)


def mixed_corpus(engine: Engine, n: int, seed: int) -> list:
    """Ingest a deterministic mixed-format corpus; returns the DocIds."""
    rng = random.Random(seed)
    doc_ids = []
    for i in range(n):
        pick = i % 3
        if pick == 0:
            raw = " ".join(rng.choice(WORDS) for _ in range(10)).encode()
            fmt = SourceFormat.PLAIN_TEXT
        elif pick == 1:
            raw = json.dumps({
                "title": " ".join(rng.choice(WORDS) for _ in range(3)),
                "region": rng.choice(REGIONS),
                "amount": rng.randint(1, 200),
                "score": round(rng.uniform(0, 10), 4),
            }, sort_keys=True).encode()
            fmt = SourceFormat.JSON_LIKE
        else:
            raw = json.dumps({
                "schema": {"id": "int", "name": "text", "amount": "decimal"},
                "row": {"id": i, "name": rng.choice(WORDS), "amount": round(rng.uniform(0, 50), 3)},
            }, sort_keys=True).encode()
            fmt = SourceFormat.RELATIONAL_ROW
        doc_id, _ = engine.ingest(raw, fmt)
        doc_ids.append(doc_id)
    return doc_ids


@pytest.fixture
def engine() -> Engine:
    return make_engine()
