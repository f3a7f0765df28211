"""Preserving-merge surrogates.

Each equivalence class keeps all its records and exposes one merged
representative. Field selection is per-field first-non-empty over a single
total member order (instance override, source-type priority, completeness,
origin, id), so the most complete record wins every field it has and gaps
are filled from the rest. User enhancements outrank all members. The
contribution map remembers where every value came from; it is what makes
field lineage and write-back possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .keys import CompositeKey
from .store import RawRecord, contributable_fields

USER_MARKER = "user-enhancement"


@dataclass(frozen=True)
class SourcePriorityConfig:
    """Relevance order for surviving values: source types most-relevant
    first, plus per-record overrides (``origin::id`` -> rank)."""

    types: tuple[str, ...] = ()
    origins: Mapping[str, str] = field(default_factory=dict)
    overrides: Mapping[str, int] = field(default_factory=dict)

    def type_rank(self, origin: str) -> tuple[int, str]:
        source_type = self.origins.get(origin, "")
        if source_type in self.types:
            return (self.types.index(source_type), "")
        # unlisted types rank after listed ones, lexicographically
        return (len(self.types), source_type)

    def override_rank(self, key: CompositeKey) -> float:
        return self.overrides.get(key.instance_ref, math.inf)


@dataclass
class Surrogate:
    class_id: str
    values: dict[str, str]
    contributions: dict[str, CompositeKey | str]  # key or USER_MARKER
    leading_member: CompositeKey
    # selection ignoring enhancements; basis for write-back targeting
    source_values: dict[str, str] = field(default_factory=dict)
    source_contributions: dict[str, CompositeKey] = field(default_factory=dict)


def completeness(record: RawRecord) -> int:
    """Information a record can give a surrogate: its non-empty
    contributable fields."""
    return len(contributable_fields(record))


def member_sort_key(record: RawRecord, config: SourcePriorityConfig):
    return (
        config.override_rank(record.key),
        config.type_rank(record.key.origin),
        -completeness(record),
        record.key.origin,
        record.key.token,
    )


def order_members(
    records: Iterable[RawRecord], config: SourcePriorityConfig
) -> list[RawRecord]:
    """Total order deciding whose information the surrogate prefers; the
    first member leads the class."""
    return sorted(records, key=lambda r: member_sort_key(r, config))


def compute_surrogate(
    class_id: str,
    records: Sequence[RawRecord],
    config: SourcePriorityConfig,
    enhancements: Mapping[str, str] | None = None,
) -> Surrogate:
    """Full per-field selection over the class. ``enhancements`` maps field
    names to user values; an empty user value forces the field absent."""
    if not records:
        raise ValueError(f"class {class_id} has no members")
    ordered = order_members(records, config)
    enhancements = enhancements or {}

    source_values: dict[str, str] = {}
    source_contributions: dict[str, CompositeKey] = {}
    field_names: set[str] = set()
    for record in ordered:
        fields = contributable_fields(record)
        field_names |= set(fields)
        for name, value in fields.items():
            if name not in source_values:
                source_values[name] = value
                source_contributions[name] = record.key

    values: dict[str, str] = {}
    contributions: dict[str, CompositeKey | str] = {}
    for name in sorted(field_names | set(enhancements)):
        if name in enhancements:
            if enhancements[name]:
                values[name] = enhancements[name]
                contributions[name] = USER_MARKER
            continue  # empty enhancement: field forced absent
        if name in source_values:
            values[name] = source_values[name]
            contributions[name] = source_contributions[name]

    return Surrogate(
        class_id=class_id,
        values=values,
        contributions=contributions,
        leading_member=ordered[0].key,
        source_values=source_values,
        source_contributions=source_contributions,
    )


def delta_update(
    surrogate: Surrogate,
    records: Sequence[RawRecord],
    config: SourcePriorityConfig,
    enhancements: Mapping[str, str] | None = None,
    changed_fields: Iterable[str] = (),
) -> Surrogate:
    """Re-select only the listed fields; everything else keeps its value and
    contribution entry. Callers must widen the field set when a change moved
    a member's rank (see Engine._widened_fields)."""
    changed = set(changed_fields)
    if not changed:
        return surrogate
    if not records:
        raise ValueError(f"class {surrogate.class_id} has no members")
    ordered = order_members(records, config)
    enhancements = enhancements or {}

    values = dict(surrogate.values)
    contributions = dict(surrogate.contributions)
    source_values = dict(surrogate.source_values)
    source_contributions = dict(surrogate.source_contributions)

    for name in changed:
        source_values.pop(name, None)
        source_contributions.pop(name, None)
        for record in ordered:
            value = contributable_fields(record).get(name, "")
            if value:
                source_values[name] = value
                source_contributions[name] = record.key
                break
        values.pop(name, None)
        contributions.pop(name, None)
        if name in enhancements:
            if enhancements[name]:
                values[name] = enhancements[name]
                contributions[name] = USER_MARKER
        elif name in source_values:
            values[name] = source_values[name]
            contributions[name] = source_contributions[name]

    return Surrogate(
        class_id=surrogate.class_id,
        values=values,
        contributions=contributions,
        leading_member=ordered[0].key,
        source_values=source_values,
        source_contributions=source_contributions,
    )


def on_member_removed(
    surrogate: Surrogate,
    remaining: Sequence[RawRecord],
    config: SourcePriorityConfig,
    enhancements: Mapping[str, str] | None = None,
    removed: CompositeKey | None = None,
) -> Surrogate | None:
    """Deletion fallback: fields the removed member contributed are
    re-selected from the survivors, in order. Returns None when the class is
    empty (the entity must leave the network)."""
    if not remaining:
        return None
    lost = {
        name
        for name, contributor in surrogate.source_contributions.items()
        if contributor == removed
    }
    if not lost:
        ordered = order_members(remaining, config)
        return replace(surrogate, leading_member=ordered[0].key)
    return delta_update(surrogate, remaining, config, enhancements, lost)
