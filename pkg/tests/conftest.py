from __future__ import annotations

import json
from pathlib import Path

import pytest

from biznet import Engine, EngineConfig


def record_line(kind: str, origin: str, local_id: str | None = None, **fields) -> str:
    doc: dict = {"kind": kind, "origin": origin}
    if local_id is not None:
        doc["id"] = local_id
    if fields:
        doc["fields"] = fields
    return json.dumps(doc)


def same_line(kind: str, origin: str, ids: list[str]) -> str:
    return json.dumps({"kind": kind, "origin": origin, "ids": ids})


# The reconstruction micro-fixture: two sys-backed participants (one
# aggregated with a prop fragment), one flow witnessed by an outbound config
# and a runtime observation.
RECON_ORIGIN = "mw1"
RECON_LINES = [
    record_line("sys", RECON_ORIGIN, "h2", description="app2"),
    record_line("sys", RECON_ORIGIN, "h3", description="app3"),
    record_line("sys", RECON_ORIGIN, "h4"),
    same_line("same_sys", RECON_ORIGIN, ["h3", "h4"]),
    record_line("prop", RECON_ORIGIN, None, target="h3", key="location", value="Sydney"),
    record_line("out", RECON_ORIGIN, "out1", **{"from": "h2", "to": "h3", "channel": "XI"}),
    record_line("rsys", RECON_ORIGIN, "rsys1", sys="h3"),
]


@pytest.fixture
def engine(tmp_path: Path) -> Engine:
    source_dir = tmp_path / "sources"
    source_dir.mkdir()
    return Engine(EngineConfig(source_dir=source_dir, state_path=tmp_path / "state.json"))


@pytest.fixture
def recon_engine(engine: Engine) -> Engine:
    engine.ingest(RECON_ORIGIN, RECON_LINES, "full")
    return engine


def write_source(root: Path, origin: str, lines: list[str], seq: int = 1) -> Path:
    origin_dir = root / origin
    origin_dir.mkdir(parents=True, exist_ok=True)
    path = origin_dir / f"snapshot-{seq}.jsonl"
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path
