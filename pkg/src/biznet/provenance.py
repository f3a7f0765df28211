"""Field-level lineage from network entities down to source records.

Lineage is materialized at commit time from the class memberships and the
surrogates' contribution maps; queries are lookups. Two transformation
classes occur: black-box (one source record, direct key mapping) and
aggregator (many records merged into one entity).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .keys import CompositeKey, render_key
from .network import bn_sort_key
from .store import RawRecord
from .surrogate import USER_MARKER, Surrogate

BLACK_BOX = "black-box"
AGGREGATOR = "aggregator"


@dataclass
class LineageRecord:
    bn_id: str
    transformation: str
    sources: list[str]  # rendered keys (kind:token@origin), sorted
    field_contributions: dict[str, str]  # field -> rendered key or USER_MARKER

    def to_doc(self) -> dict:
        return {
            "bn_id": self.bn_id,
            "transformation": self.transformation,
            "sources": list(self.sources),
            "field_contributions": dict(sorted(self.field_contributions.items())),
        }


def lineage_record(
    bn_id: str,
    members: Iterable[RawRecord],
    surrogate: Surrogate,
) -> LineageRecord:
    keyed = {record.key: record for record in members}
    sources = sorted(render_key(r.kind, r.key) for r in keyed.values())
    contributions: dict[str, str] = {}
    for name, contributor in surrogate.contributions.items():
        if contributor == USER_MARKER:
            contributions[name] = USER_MARKER
        else:
            record = keyed.get(contributor)
            if record is not None:
                contributions[name] = render_key(record.kind, record.key)
    return LineageRecord(
        bn_id=bn_id,
        transformation=BLACK_BOX if len(sources) == 1 else AGGREGATOR,
        sources=sources,
        field_contributions=contributions,
    )


class LineageStore:
    """Materialized lineage plus the reverse key mapping."""

    def __init__(self) -> None:
        self._records: dict[str, LineageRecord] = {}
        self._reverse: dict[str, set[str]] = {}  # key string -> bn ids

    def put(self, record: LineageRecord) -> None:
        self.remove(record.bn_id)
        self._records[record.bn_id] = record
        for source in record.sources:
            key = _strip_kind(source)
            self._reverse.setdefault(key, set()).add(record.bn_id)

    def remove(self, bn_id: str) -> None:
        old = self._records.pop(bn_id, None)
        if old is None:
            return
        for source in old.sources:
            key = _strip_kind(source)
            holders = self._reverse.get(key)
            if holders is not None:
                holders.discard(bn_id)
                if not holders:
                    del self._reverse[key]

    def lineage(self, bn_id: str) -> LineageRecord:
        record = self._records.get(bn_id)
        if record is None:
            raise KeyError(bn_id)
        return record

    def trace_field(self, bn_id: str, field: str) -> str:
        """The unique contributor of one entity field (rendered key or the
        user marker); with it, the origin anchors the value to its source."""
        record = self.lineage(bn_id)
        contributor = record.field_contributions.get(field)
        if contributor is None:
            raise KeyError(field)
        return contributor

    def reverse_lookup(self, key: CompositeKey | str) -> set[str]:
        """All bn ids whose lineage includes the key. Empty set is a valid
        answer (tombstoned or unmapped keys)."""
        return set(self._reverse.get(str(key), ()))

    def all_records(self) -> list[LineageRecord]:
        return sorted(self._records.values(), key=lambda r: bn_sort_key(r.bn_id))

    def mapping_entries(self) -> list[dict]:
        """Key mapping in export form: one entry per (source key, bn id)."""
        entries = []
        for record in self.all_records():
            for source in record.sources:
                entries.append({"source": source, "bn_id": record.bn_id})
        return entries


def _strip_kind(rendered: str) -> str:
    """kind:token@origin -> token@origin (identity excludes the kind)."""
    return rendered.split(":", 1)[1]


def check_round_trip(store: LineageStore) -> None:
    """Exhaustive lineage/reverse-lookup consistency check (desk scale)."""
    for record in store.all_records():
        for source in record.sources:
            assert record.bn_id in store.reverse_lookup(_strip_kind(source)), (
                f"{source} missing reverse entry for {record.bn_id}"
            )
    for key, bn_ids in store._reverse.items():
        for bn_id in bn_ids:
            lineage = store.lineage(bn_id)
            assert any(_strip_kind(s) == key for s in lineage.sources), (
                f"reverse entry {key} -> {bn_id} has no forward source"
            )
