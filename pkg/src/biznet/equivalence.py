"""Equivalence classes over raw-record keys.

Assertions come from explicit same_* facts, prop-fragment attachments,
configured match rules, and users. The partition is maintained
incrementally: merges use union-find, removals re-derive only the affected
component from the surviving assertion set (union-find cannot un-merge).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .keys import CompositeKey
from .store import CATEGORY_BY_KIND, RawRecord

PROVENANCE_FACT = "explicit-fact"
PROVENANCE_USER = "user"


def rule_provenance(rule_id: str) -> str:
    return f"rule:{rule_id}"


@dataclass(frozen=True)
class EquivalenceAssertion:
    member_a: CompositeKey
    member_b: CompositeKey
    provenance: str
    source: CompositeKey | None = None  # record the fact was derived from

    @property
    def pair(self) -> tuple[CompositeKey, CompositeKey]:
        a, b = sorted((self.member_a, self.member_b), key=lambda k: k.sort_key)
        return a, b

    @property
    def assertion_id(self) -> tuple:
        return (*self.pair, self.provenance, self.source)


@dataclass(frozen=True)
class MatchRule:
    """Two records of ``kind`` are asserted equivalent when all ``fields``
    are non-empty and equal after trim + case-fold."""

    rule_id: str
    kind: str
    fields: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.fields:
            raise ValueError(f"rule {self.rule_id!r} needs at least one field")
        if self.kind not in CATEGORY_BY_KIND:
            raise ValueError(f"rule {self.rule_id!r}: kind {self.kind!r} is not inferable")

    def signature(self, record: RawRecord) -> tuple[str, ...] | None:
        values = []
        for name in self.fields:
            value = record.fields.get(name, "").strip().casefold()
            if not value:
                return None
            values.append(value)
        return tuple(values)


def apply_rules(
    changed: Iterable[RawRecord],
    rules: Iterable[MatchRule],
    candidates: Mapping[str, list[RawRecord]],
) -> list[EquivalenceAssertion]:
    """Assertions for every changed record that agrees with another record of
    its kind on all fields of a rule. Deterministic: sorted by (rule id, pair).
    """
    out: dict[tuple, EquivalenceAssertion] = {}
    for rule in rules:
        for record in changed:
            if record.kind != rule.kind:
                continue
            signature = rule.signature(record)
            if signature is None:
                continue
            for other in candidates.get(rule.kind, []):
                if other.key == record.key:
                    continue
                if rule.signature(other) == signature:
                    assertion = EquivalenceAssertion(
                        record.key, other.key, rule_provenance(rule.rule_id)
                    )
                    out[assertion.assertion_id] = assertion
    return sorted(
        out.values(),
        key=lambda a: (a.provenance, a.pair[0].sort_key, a.pair[1].sort_key),
    )


class Partition:
    """Incremental partition of inferable keys, one category per class."""

    def __init__(self) -> None:
        self._category: dict[CompositeKey, str] = {}
        self._parent: dict[CompositeKey, CompositeKey] = {}
        self._members: dict[CompositeKey, set[CompositeKey]] = {}
        self._assertions: dict[tuple, EquivalenceAssertion] = {}
        self._by_key: dict[CompositeKey, set[tuple]] = {}
        self.touched: set[CompositeKey] = set()

    # -- queries ----------------------------------------------------------

    def __contains__(self, key: CompositeKey) -> bool:
        return key in self._category

    def category_of(self, key: CompositeKey) -> str | None:
        return self._category.get(key)

    def members_of(self, key: CompositeKey) -> frozenset[CompositeKey]:
        if key not in self._category:
            return frozenset()
        return frozenset(self._members[self._find(key)])

    def class_id_of(self, key: CompositeKey) -> str | None:
        if key not in self._category:
            return None
        return class_id(self._members[self._find(key)])

    def classes(self) -> dict[str, frozenset[CompositeKey]]:
        return {
            class_id(members): frozenset(members)
            for members in self._members.values()
        }

    def active_assertions(self) -> list[EquivalenceAssertion]:
        return list(self._assertions.values())

    def has_assertion(self, aid: tuple) -> bool:
        return aid in self._assertions

    def assertion_ids_of(self, key: CompositeKey) -> list[tuple]:
        return list(self._by_key.get(key, ()))

    def check_partition(self) -> None:
        """Exhaustive partition invariant check (desk scale, for tests)."""
        seen: set[CompositeKey] = set()
        for root, members in self._members.items():
            assert root in members
            categories = {self._category[m] for m in members}
            assert len(categories) == 1, f"class spans categories: {categories}"
            for member in members:
                assert self._find(member) == root
                assert member not in seen
                seen.add(member)
        assert seen == set(self._category)

    # -- mutation ---------------------------------------------------------

    def add_key(self, key: CompositeKey, category: str) -> None:
        if key in self._category:
            return
        self._category[key] = category
        self._parent[key] = key
        self._members[key] = {key}
        self.touched.add(key)

    def remove_key(self, key: CompositeKey) -> None:
        """Drop a key, deactivate its assertions, re-derive the component."""
        if key not in self._category:
            return
        component = set(self._members[self._find(key)])
        for aid in list(self._by_key.get(key, ())):
            self._discard_assertion(aid)
        component.discard(key)
        del self._category[key]
        del self._parent[key]
        self._members.pop(key, None)
        self._by_key.pop(key, None)
        self.touched.add(key)
        self._rederive(component)

    def add_assertion(self, assertion: EquivalenceAssertion) -> str:
        """Register and apply one assertion.

        Returns merged | noop, or raises ValueError for structural rejects
        (self-assertion, unknown key, category mismatch).
        """
        a, b = assertion.member_a, assertion.member_b
        if a == b:
            raise ValueError("self-assertion rejected")
        for key in (a, b):
            if key not in self._category:
                raise ValueError(f"unknown key {key}")
        if self._category[a] != self._category[b]:
            raise ValueError(
                f"kind-category mismatch: {self._category[a]} vs {self._category[b]}"
            )
        aid = assertion.assertion_id
        known = aid in self._assertions
        self._assertions[aid] = assertion
        self._by_key.setdefault(a, set()).add(aid)
        self._by_key.setdefault(b, set()).add(aid)
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return "noop" if known else "merged"
        if len(self._members[ra]) < len(self._members[rb]):
            ra, rb = rb, ra
        absorbed = self._members.pop(rb)
        for member in absorbed:
            self._parent[member] = ra
        self._members[ra] |= absorbed
        self.touched |= self._members[ra]
        return "merged"

    def remove_assertion(self, aid: tuple) -> None:
        """Deactivate one assertion and re-derive its component."""
        assertion = self._assertions.get(aid)
        if assertion is None:
            return
        component = set()
        for key in assertion.pair:
            if key in self._category:
                component |= self._members[self._find(key)]
        self._discard_assertion(aid)
        self._rederive(component)

    def remove_assertions_from_source(self, source: CompositeKey) -> None:
        for aid in [
            aid for aid, a in self._assertions.items() if a.source == source
        ]:
            self.remove_assertion(aid)

    # -- internals --------------------------------------------------------

    def _find(self, key: CompositeKey) -> CompositeKey:
        root = key
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[key] != root:
            self._parent[key], key = root, self._parent[key]
        return root

    def _discard_assertion(self, aid: tuple) -> None:
        assertion = self._assertions.pop(aid, None)
        if assertion is None:
            return
        for key in assertion.pair:
            ids = self._by_key.get(key)
            if ids is not None:
                ids.discard(aid)
                if not ids:
                    del self._by_key[key]

    def _rederive(self, component: set[CompositeKey]) -> None:
        """Re-partition one component from the surviving assertions inside it."""
        if not component:
            return
        for key in component:
            self._parent[key] = key
            self._members[key] = {key}
        applied: set[tuple] = set()
        for key in component:
            for aid in self._by_key.get(key, ()):
                if aid in applied:
                    continue
                applied.add(aid)
                a, b = self._assertions[aid].pair
                if a not in component or b not in component:
                    continue
                ra, rb = self._find(a), self._find(b)
                if ra == rb:
                    continue
                if len(self._members[ra]) < len(self._members[rb]):
                    ra, rb = rb, ra
                absorbed = self._members.pop(rb)
                for member in absorbed:
                    self._parent[member] = ra
                self._members[ra] |= absorbed
        self.touched |= component


def class_id(members: Iterable[CompositeKey]) -> str:
    """Stable class id: the lexicographically smallest member key string.

    Every key enters the partition as a singleton carrying its own id, and
    merges keep the smallest surviving id, so this is equivalent to the
    incremental rule while staying independent of load order.
    """
    return "cls:" + min(str(k) for k in members)
