"""Search, projection and traversal over the published network snapshot.

The index is maintained incrementally from commit deltas and must always
equal a from-scratch rebuild of the same snapshot (the rebuild is the test
oracle). Tokenization splits on non-alphanumerics and case-folds; ranking
is matched-token count descending, bn id ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .kernels import tokenize
from .network import (
    KIND_HOST_ENTITY,
    KIND_MESSAGE_FLOW,
    KIND_PARTICIPANT,
    NetworkEntity,
    bn_sort_key,
)

ENTITY_KINDS = {KIND_PARTICIPANT, KIND_HOST_ENTITY, KIND_MESSAGE_FLOW}


@dataclass
class NetworkIndex:
    keyword: dict[str, set[str]] = field(default_factory=dict)
    fields: dict[tuple[str, str, str], set[str]] = field(default_factory=dict)
    # per-entity postings, so removal leaves nothing stale
    _tokens_of: dict[str, set[str]] = field(default_factory=dict)
    _fields_of: dict[str, set[tuple[str, str, str]]] = field(default_factory=dict)
    # adjacency: participant -> flow neighbors / entity -> runs-on hosts
    neighbors: dict[str, set[str]] = field(default_factory=dict)
    hosts_of: dict[str, set[str]] = field(default_factory=dict)
    hosted: dict[str, set[str]] = field(default_factory=dict)

    # -- postings ---------------------------------------------------------

    def index_entity(self, entity: NetworkEntity, extra_texts: Iterable[str] = ()) -> None:
        self.remove_entity(entity.bn_id)
        texts = [entity.name, *entity.attributes.values(), *extra_texts]
        tokens = {token for text in texts for token in tokenize(text)}
        self._tokens_of[entity.bn_id] = tokens
        for token in tokens:
            self.keyword.setdefault(token, set()).add(entity.bn_id)
        entries = {
            (entity.kind, name, value.strip().casefold())
            for name, value in entity.attributes.items()
        }
        self._fields_of[entity.bn_id] = entries
        for entry in entries:
            self.fields.setdefault(entry, set()).add(entity.bn_id)

    def remove_entity(self, bn_id: str) -> None:
        for token in self._tokens_of.pop(bn_id, ()):
            holders = self.keyword.get(token)
            if holders is not None:
                holders.discard(bn_id)
                if not holders:
                    del self.keyword[token]
        for entry in self._fields_of.pop(bn_id, ()):
            holders = self.fields.get(entry)
            if holders is not None:
                holders.discard(bn_id)
                if not holders:
                    del self.fields[entry]

    # -- adjacency --------------------------------------------------------

    def set_adjacency(
        self,
        flows: Iterable[NetworkEntity],
        runs_on: Iterable[tuple[str, str]],
    ) -> None:
        self.neighbors = {}
        self.hosts_of = {}
        self.hosted = {}
        for flow in flows:
            if flow.source and flow.target:
                self.neighbors.setdefault(flow.source, set()).add(flow.target)
                self.neighbors.setdefault(flow.target, set()).add(flow.source)
        for participant, host in runs_on:
            self.hosts_of.setdefault(participant, set()).add(host)
            self.hosted.setdefault(host, set()).add(participant)


def rebuild_index(
    entities: Mapping[str, NetworkEntity],
    texts_by_entity: Mapping[str, list[str]],
    runs_on: Iterable[tuple[str, str]],
) -> NetworkIndex:
    """From-scratch index over a snapshot; the oracle for incremental
    maintenance."""
    index = NetworkIndex()
    for bn_id, entity in entities.items():
        index.index_entity(entity, texts_by_entity.get(bn_id, []))
    flows = [e for e in entities.values() if e.kind == KIND_MESSAGE_FLOW]
    index.set_adjacency(flows, runs_on)
    return index


class UnknownKind(ValueError):
    pass


def search(
    entities: Mapping[str, NetworkEntity],
    index: NetworkIndex,
    term: str | None = None,
    type_: str | None = None,
    field_filters: Mapping[str, str] | None = None,
    offset: int = 0,
    limit: int | None = None,
) -> list[tuple[NetworkEntity, int]]:
    """Keyword search with type restriction and field-specific criteria.

    The result set is the intersection of the individual criteria; ranking
    is by number of matching query tokens, ties broken by bn id.
    """
    if type_ is not None:
        type_ = normalize_kind(type_)
    field_filters = field_filters or {}

    scores: dict[str, int] = {}
    if term:
        for token in set(tokenize(term)):
            for bn_id in index.keyword.get(token, ()):
                scores[bn_id] = scores.get(bn_id, 0) + 1
        candidates = set(scores)
    else:
        candidates = set(entities)

    if type_ is not None:
        candidates = {b for b in candidates if entities[b].kind == type_}
    for name, value in field_filters.items():
        wanted = value.strip().casefold()
        candidates &= {
            b
            for entry in ((kind, name, wanted) for kind in ENTITY_KINDS)
            for b in index.fields.get(entry, ())
        }

    ranked = sorted(candidates, key=lambda b: (-scores.get(b, 0), bn_sort_key(b)))
    window = ranked[offset : offset + limit if limit is not None else None]
    return [(entities[b], scores.get(b, 0)) for b in window]


def neighbors(
    bn_id: str,
    entities: Mapping[str, NetworkEntity],
    index: NetworkIndex,
    kind: str | None = None,
) -> list[NetworkEntity]:
    """FoaF traversal: flow neighbors of a participant; with kind=Host, the
    runs-on hosts of those neighbors."""
    entity = entities[bn_id]
    if entity.kind == KIND_PARTICIPANT:
        neighbor_ids = set(index.neighbors.get(bn_id, ()))
    elif entity.kind == KIND_HOST_ENTITY:
        neighbor_ids = set(index.hosted.get(bn_id, ()))
    else:  # a flow's neighborhood is its two endpoints
        neighbor_ids = {e for e in (entity.source, entity.target) if e}

    if kind is None:
        result = neighbor_ids
    else:
        normalized = normalize_kind(kind)
        if normalized == KIND_HOST_ENTITY:
            result = {
                host
                for neighbor in neighbor_ids
                for host in index.hosts_of.get(neighbor, ())
            }
        elif normalized == KIND_PARTICIPANT:
            result = {b for b in neighbor_ids if entities[b].kind == KIND_PARTICIPANT}
        else:
            raise UnknownKind(kind)
    return [entities[b] for b in sorted(result, key=bn_sort_key) if b in entities]


def project(
    bn_id: str,
    entities: Mapping[str, NetworkEntity],
    index: NetworkIndex,
    show_paths: Sequence[str],
    labels_of=None,
) -> dict:
    """Attribute projection with single-hop edge paths (``host.name``).

    ``meta`` expands to bn id, kind and name; an empty path list defaults to
    meta. Unknown segments produce a per-path error entry and the remaining
    paths are still served.
    """
    entity = entities[bn_id]
    paths = [p.strip() for p in show_paths if p.strip()] or ["meta"]
    doc: dict = {}
    for path in paths:
        if path == "meta":
            doc["meta"] = {"bn_id": entity.bn_id, "kind": entity.kind, "name": entity.name}
        elif path == "labels" and labels_of is not None:
            doc["labels"] = labels_of(bn_id)
        elif "." in path:
            edge, _, attribute = path.partition(".")
            targets = _edge_targets(entity, edge, index)
            if targets is None:
                doc[path] = {"error": f"unknown edge {edge!r}"}
                continue
            doc[path] = [
                _projected_value(entities[t], attribute)
                for t in sorted(targets, key=bn_sort_key)
                if t in entities
            ]
        elif path in entity.attributes:
            doc[path] = entity.attributes[path]
        else:
            doc[path] = {"error": f"unknown field {path!r}"}
    return doc


def _projected_value(entity: NetworkEntity, attribute: str):
    if attribute == "name":
        return entity.name
    if attribute == "meta":
        return {"bn_id": entity.bn_id, "kind": entity.kind, "name": entity.name}
    return entity.attributes.get(attribute, "")


def _edge_targets(
    entity: NetworkEntity, edge: str, index: NetworkIndex
) -> set[str] | None:
    if edge == "host":
        return set(index.hosts_of.get(entity.bn_id, ()))
    if edge == "neighbors":
        return set(index.neighbors.get(entity.bn_id, ()))
    if edge in ("source", "target") and entity.kind == KIND_MESSAGE_FLOW:
        endpoint = entity.source if edge == "source" else entity.target
        return {endpoint} if endpoint else set()
    return None


def normalize_kind(kind: str) -> str:
    folded = kind.strip().casefold()
    for known in ENTITY_KINDS:
        if known.casefold() == folded:
            return known
    raise UnknownKind(kind)
