"""The materialized business network.

Participants come from sys-backed classes, hosts from host classes, message
flows from outbound-config records grouped by their resolved endpoint pair
and corroborated by runtime observations. BN ids are kind-scoped counters,
memoized per class so reloads never renumber, and never reused.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterable, Mapping, Sequence

from .keys import CompositeKey
from .store import KIND_SYS, RawRecord
from .surrogate import SourcePriorityConfig, Surrogate, compute_surrogate

KIND_PARTICIPANT = "Participant"
KIND_HOST_ENTITY = "Host"
KIND_MESSAGE_FLOW = "MessageFlow"

_BN_PREFIX = {
    KIND_PARTICIPANT: "participant",
    KIND_HOST_ENTITY: "host",
    KIND_MESSAGE_FLOW: "mflow",
}
_KIND_BY_PREFIX = {v: k for k, v in _BN_PREFIX.items()}


def kind_of_bn_id(bn_id: str) -> str | None:
    prefix = bn_id.split(":", 1)[0]
    return _KIND_BY_PREFIX.get(prefix)


def bn_sort_key(bn_id: str) -> tuple[str, int]:
    prefix, _, number = bn_id.partition(":")
    return (prefix, int(number)) if number.isdigit() else (prefix, 0)


@dataclass
class NetworkEntity:
    bn_id: str
    kind: str
    name: str
    attributes: dict[str, str]
    source: str | None = None  # flow endpoints (participant bn ids)
    target: str | None = None

    def to_doc(self) -> dict:
        doc = {
            "bn_id": self.bn_id,
            "kind": self.kind,
            "name": self.name,
            "attributes": dict(sorted(self.attributes.items())),
        }
        if self.kind == KIND_MESSAGE_FLOW:
            doc["source"] = self.source
            doc["target"] = self.target
        return doc


@dataclass
class FlowGroup:
    """One inferred flow: its endpoint pair and the records that witness it."""

    source_bn: str
    target_bn: str
    outs: list[RawRecord]
    corroborating: list[RawRecord]

    @property
    def group_key(self) -> str:
        return f"{self.source_bn}->{self.target_bn}"

    @property
    def members(self) -> list[RawRecord]:
        return self.outs + self.corroborating


@dataclass
class NetworkDelta:
    upserted: list[str] = dc_field(default_factory=list)
    removed: list[str] = dc_field(default_factory=list)


class AmbiguousName(LookupError):
    def __init__(self, name: str, candidates: Sequence[str]):
        super().__init__(f"name {name!r} is ambiguous")
        self.name = name
        self.candidates = sorted(candidates, key=bn_sort_key)


class IdAllocator:
    """Kind-scoped ascending bn ids, memoized by a stable anchor (class id or
    flow endpoint pair) so identical inputs always get identical ids."""

    def __init__(self) -> None:
        self.counters: dict[str, int] = {}
        self.memo: dict[str, str] = {}

    def allocate(self, kind: str, anchor: str) -> str:
        memo_key = f"{kind}|{anchor}"
        bn_id = self.memo.get(memo_key)
        if bn_id is None:
            prefix = _BN_PREFIX[kind]
            self.counters[prefix] = self.counters.get(prefix, 0) + 1
            bn_id = f"{prefix}:{self.counters[prefix]}"
            self.memo[memo_key] = bn_id
        return bn_id

    def to_doc(self) -> dict:
        return {"counters": dict(self.counters), "memo": dict(self.memo)}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "IdAllocator":
        allocator = cls()
        allocator.counters = {str(k): int(v) for k, v in doc.get("counters", {}).items()}
        allocator.memo = {str(k): str(v) for k, v in doc.get("memo", {}).items()}
        return allocator


def display_name(surrogate_values: Mapping[str, str], leading: CompositeKey) -> str:
    return (
        surrogate_values.get("description")
        or surrogate_values.get("name")
        or leading.token
    )


def entity_from_class(
    bn_id: str, kind: str, surrogate: Surrogate
) -> NetworkEntity:
    return NetworkEntity(
        bn_id=bn_id,
        kind=kind,
        name=display_name(surrogate.values, surrogate.leading_member),
        attributes=dict(surrogate.values),
    )


def infer_message_flows(
    out_records: Iterable[RawRecord],
    rsys_records: Iterable[RawRecord],
    resolve_endpoint: Callable[[str, str], str | None],
) -> tuple[list[FlowGroup], list[tuple[CompositeKey, str]]]:
    """Group outbound configs by resolved (source, target) participant pair;
    attach runtime observations that corroborate an endpoint.

    ``resolve_endpoint(reference, origin)`` returns a participant bn id or
    None. Unresolvable out records are returned as pending, never as
    dangling flows.
    """
    groups: dict[tuple[str, str], FlowGroup] = {}
    pending: list[tuple[CompositeKey, str]] = []

    ordered_outs = sorted(out_records, key=lambda r: r.key.sort_key)
    for record in ordered_outs:
        source_ref = record.fields.get("from", "")
        target_ref = record.fields.get("to", "")
        if not source_ref or not target_ref:
            pending.append((record.key, "missing from/to reference"))
            continue
        source_bn = resolve_endpoint(source_ref, record.key.origin)
        target_bn = resolve_endpoint(target_ref, record.key.origin)
        if source_bn is None or target_bn is None:
            missing = source_ref if source_bn is None else target_ref
            pending.append((record.key, f"unresolvable endpoint {missing!r}"))
            continue
        group = groups.setdefault(
            (source_bn, target_bn), FlowGroup(source_bn, target_bn, [], [])
        )
        group.outs.append(record)

    endpoint_index: dict[str, list[FlowGroup]] = {}
    for group in groups.values():
        endpoint_index.setdefault(group.source_bn, []).append(group)
        if group.target_bn != group.source_bn:
            endpoint_index.setdefault(group.target_bn, []).append(group)

    for record in sorted(rsys_records, key=lambda r: r.key.sort_key):
        observed = record.fields.get("sys", "")
        if not observed:
            continue
        observed_bn = resolve_endpoint(observed, record.key.origin)
        if observed_bn is None:
            continue
        for group in endpoint_index.get(observed_bn, ()):
            group.corroborating.append(record)

    return sorted(groups.values(), key=lambda g: g.group_key), pending


def flow_surrogate(
    group: FlowGroup,
    config: SourcePriorityConfig,
    enhancements: Mapping[str, str] | None = None,
) -> Surrogate:
    """Merge a flow group's attributes with the same comparator as classes."""
    return compute_surrogate(group.group_key, group.members, config, enhancements)


def flow_entity(bn_id: str, group: FlowGroup, surrogate: Surrogate) -> NetworkEntity:
    return NetworkEntity(
        bn_id=bn_id,
        kind=KIND_MESSAGE_FLOW,
        name=display_name(surrogate.values, surrogate.leading_member),
        attributes=dict(surrogate.values),
        source=group.source_bn,
        target=group.target_bn,
    )


def class_entity_kind(members: Iterable[RawRecord], category: str) -> str | None:
    """Entity kind materialized for a class, or None for dormant classes
    (prop-only fragments do not witness a participant)."""
    if category == "host":
        return KIND_HOST_ENTITY
    if category == "participant" and any(m.kind == KIND_SYS for m in members):
        return KIND_PARTICIPANT
    return None


def resolve_name(
    name: str,
    entities: Mapping[str, NetworkEntity],
    name_index: Mapping[str, list[str]],
) -> str:
    """Entity addressing: literal bn id, else case-insensitive unique name."""
    if name in entities:
        return name
    matches = name_index.get(name.strip().casefold(), [])
    if not matches:
        raise KeyError(name)
    if len(matches) > 1:
        raise AmbiguousName(name, matches)
    return matches[0]


def build_name_index(entities: Mapping[str, NetworkEntity]) -> dict[str, list[str]]:
    index: dict[str, list[str]] = {}
    for entity in entities.values():
        index.setdefault(entity.name.strip().casefold(), []).append(entity.bn_id)
    for bn_ids in index.values():
        bn_ids.sort(key=bn_sort_key)
    return index
