"""Configured rules and priorities working through the whole pipeline."""

from __future__ import annotations

from pathlib import Path

from biznet import Engine, EngineConfig
from biznet.equivalence import MatchRule
from biznet.surrogate import SourcePriorityConfig

from .conftest import record_line


def engine_with(tmp_path: Path, **kwargs) -> Engine:
    source_dir = tmp_path / "sources"
    source_dir.mkdir(exist_ok=True)
    return Engine(EngineConfig(source_dir=source_dir, **kwargs))


def test_match_rule_merges_across_origins(tmp_path):
    engine = engine_with(
        tmp_path, rules=[MatchRule("by-desc", "sys", ("description",))]
    )
    engine.ingest("o1", [record_line("sys", "o1", "a", description="myH7")], "full")
    engine.ingest("o2", [record_line("sys", "o2", "b", description="MYH7 ")], "full")
    participants = [e for e in engine.entities.values() if e.kind == "Participant"]
    assert len(participants) == 1
    lineage = engine.lineage_doc(participants[0].bn_id)
    assert lineage["transformation"] == "aggregator"
    assert sorted(lineage["sources"]) == ["sys:a@o1", "sys:b@o2"]


def test_rule_match_dissolves_when_field_changes(tmp_path):
    engine = engine_with(
        tmp_path, rules=[MatchRule("by-desc", "sys", ("description",))]
    )
    engine.ingest("o1", [record_line("sys", "o1", "a", description="same")], "full")
    engine.ingest("o2", [record_line("sys", "o2", "b", description="same")], "full")
    assert len([e for e in engine.entities.values() if e.kind == "Participant"]) == 1
    # the second record diverges: the rule no longer holds, the class splits
    engine.ingest("o2", [record_line("sys", "o2", "b", description="different")], "full")
    participants = [e for e in engine.entities.values() if e.kind == "Participant"]
    assert len(participants) == 2
    engine.partition.check_partition()


def test_no_rules_by_default_keeps_records_separate(tmp_path):
    engine = engine_with(tmp_path)
    engine.ingest("o1", [record_line("sys", "o1", "a", description="same")], "full")
    engine.ingest("o2", [record_line("sys", "o2", "b", description="same")], "full")
    assert len([e for e in engine.entities.values() if e.kind == "Participant"]) == 2


def test_type_priority_decides_surrogate_winner(tmp_path):
    priorities = SourcePriorityConfig(
        types=("landscape", "runtime"),
        origins={"lo": "landscape", "ro": "runtime"},
    )
    engine = engine_with(
        tmp_path,
        priorities=priorities,
        rules=[MatchRule("by-name", "sys", ("name",))],
    )
    # runtime record is more complete, landscape still outranks it
    engine.ingest("ro", [
        record_line("sys", "ro", "r1", name="erp", description="from runtime", owner="ops"),
    ], "full")
    engine.ingest("lo", [
        record_line("sys", "lo", "l1", name="erp", description="from landscape"),
    ], "full")
    participants = [e for e in engine.entities.values() if e.kind == "Participant"]
    assert len(participants) == 1
    entity = participants[0]
    assert entity.attributes["description"] == "from landscape"
    assert entity.attributes["owner"] == "ops"  # gap filled from runtime
    assert engine.lineage.trace_field(entity.bn_id, "description") == "sys:l1@lo"
    assert engine.lineage.trace_field(entity.bn_id, "owner") == "sys:r1@ro"


def test_instance_override_beats_type_priority(tmp_path):
    priorities = SourcePriorityConfig(
        types=("landscape", "runtime"),
        origins={"lo": "landscape", "ro": "runtime"},
        overrides={"ro::r1": 1},
    )
    engine = engine_with(
        tmp_path,
        priorities=priorities,
        rules=[MatchRule("by-name", "sys", ("name",))],
    )
    engine.ingest("ro", [record_line("sys", "ro", "r1", name="erp", description="pinned runtime")], "full")
    engine.ingest("lo", [record_line("sys", "lo", "l1", name="erp", description="landscape")], "full")
    entity = next(e for e in engine.entities.values() if e.kind == "Participant")
    assert entity.attributes["description"] == "pinned runtime"
