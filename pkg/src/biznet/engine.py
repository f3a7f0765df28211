"""The inference engine: single writer lane, snapshot-consistent reads.

Every mutation (ingest, assertion, curation) funnels through one commit
pipeline: partition maintenance, surrogate recalculation (field-level deltas
where possible), entity/flow materialization, lineage, index update. Commits
complete under the writer lock, so reads only ever observe committed states.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Iterable, Mapping

from .config import EngineConfig
from .curation import (
    OP_CREATE,
    OP_DELETE,
    OP_MODIFY,
    RAW_KIND_FOR_ENTITY,
    STATUS_DEPLOYED,
    STATUS_FAILED,
    CurationError,
    Enhancement,
    EnrichmentArtifact,
    WriteBackPlan,
)
from .equivalence import (
    PROVENANCE_FACT,
    PROVENANCE_USER,
    EquivalenceAssertion,
    Partition,
    apply_rules,
)
from .keys import CompositeKey
from .network import (
    KIND_HOST_ENTITY,
    KIND_MESSAGE_FLOW,
    KIND_PARTICIPANT,
    FlowGroup,
    IdAllocator,
    NetworkEntity,
    bn_sort_key,
    build_name_index,
    class_entity_kind,
    entity_from_class,
    flow_entity,
    flow_surrogate,
    infer_message_flows,
    resolve_name,
)
from .provenance import LineageStore, lineage_record
from .query import neighbors, project, search, NetworkIndex
from .sources import RecordEdit, SourceDirectory, SourceError
from .store import (
    CATEGORY_BY_KIND,
    KIND_OUT,
    KIND_PROP,
    KIND_RSYS,
    KIND_RUNS_ON,
    SAME_PREFIX,
    STRUCTURAL_FIELDS,
    ChangeSet,
    RawRecord,
    RawStore,
    contributable_fields,
)
from .surrogate import (
    Surrogate,
    compute_surrogate,
    delta_update,
    on_member_removed,
)

STATE_VERSION = 1


@dataclass
class Diagnostics:
    """Non-fatal findings of the last commit."""

    rejected_assertions: list[dict] = dc_field(default_factory=list)
    pending_flows: list[dict] = dc_field(default_factory=list)
    skipped_edges: list[dict] = dc_field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "rejected_assertions": list(self.rejected_assertions),
            "pending_flows": list(self.pending_flows),
            "skipped_edges": list(self.skipped_edges),
        }


class Engine:
    def __init__(self, config: EngineConfig | None = None, *, persist: bool = False):
        self.config = config or EngineConfig()
        self.sources = SourceDirectory(self.config.source_dir)
        self._persist = persist
        self._lock = threading.RLock()

        self.store = RawStore()
        self.partition = Partition()
        self.allocator = IdAllocator()

        # durable user input
        self.user_assertions: list[EquivalenceAssertion] = []
        self.overlay: dict[str, dict[str, str]] = {}  # backing key -> field -> value
        self.enrichments: dict[str, EnrichmentArtifact] = {}
        self.enhancements: dict[str, Enhancement] = {}
        self._artifact_seq = 0
        self._enhancement_seq = 0

        # derived state, maintained incrementally per commit
        self.class_members: dict[str, frozenset[CompositeKey]] = {}
        self.key_class: dict[CompositeKey, str] = {}
        self.surrogates: dict[str, Surrogate] = {}
        self.entities: dict[str, NetworkEntity] = {}
        self.entity_backing: dict[str, str] = {}  # bn id -> backing key
        self.backing_entity: dict[str, str] = {}
        self.flow_groups: dict[str, FlowGroup] = {}
        self.flow_surrogates: dict[str, Surrogate] = {}
        self.runs_on: list[tuple[str, str]] = []
        self.lineage = LineageStore()
        self.index = NetworkIndex()
        self.name_index: dict[str, list[str]] = {}
        self.diagnostics = Diagnostics()
        self._fact_assertions: dict[CompositeKey, set[tuple]] = {}

    # ------------------------------------------------------------------
    # ingestion
    # ------------------------------------------------------------------

    def ingest(self, origin: str, lines: Iterable[str], mode: str = "full") -> dict:
        with self._lock:
            report, changes = self.store.ingest_snapshot(origin, list(lines), mode)
            self._commit(changes)
            return report.to_doc()

    def load_file(self, origin: str, path: str | Path, mode: str = "full") -> dict:
        path = Path(path)
        if not path.is_file():
            raise SourceError(f"snapshot file not found: {path}")
        lines = path.read_text(encoding="utf-8").splitlines()
        return self.ingest(origin, lines, mode)

    def load_source(self, origin: str, mode: str = "full") -> dict:
        """Ingest the origin's latest snapshot from the mock source tree."""
        lines = self.sources.read_snapshot(origin)
        return self.ingest(origin, lines, mode)

    def load_all_sources(self, mode: str = "full") -> list[dict]:
        return [self.load_source(origin, mode) for origin in self.sources.origins()]

    # ------------------------------------------------------------------
    # equivalence input
    # ------------------------------------------------------------------

    def assert_same(self, a: CompositeKey, b: CompositeKey) -> dict:
        """Durable user assertion; held pending while either key is unknown."""
        if a == b:
            return {"status": "rejected", "reason": "self-assertion rejected"}
        assertion = EquivalenceAssertion(a, b, PROVENANCE_USER)
        with self._lock:
            if not any(
                u.assertion_id == assertion.assertion_id for u in self.user_assertions
            ):
                self.user_assertions.append(assertion)
            self._commit(ChangeSet())
            class_id = self.partition.class_id_of(a)
            if class_id is not None and class_id == self.partition.class_id_of(b):
                return {"status": "applied", "class_id": class_id}
            for d in self.diagnostics.rejected_assertions:
                if d["provenance"] == PROVENANCE_USER and {str(a), str(b)} == set(d["pair"]):
                    self.user_assertions = [
                        u
                        for u in self.user_assertions
                        if u.assertion_id != assertion.assertion_id
                    ]
                    return {"status": "rejected", "reason": d["reason"]}
            return {"status": "pending"}

    # ------------------------------------------------------------------
    # curation
    # ------------------------------------------------------------------

    def add_label(self, target: str, text: str) -> dict:
        if not text or not text.strip():
            raise CurationError("label text must be non-empty")
        with self._lock:
            bn_id = self.resolve(target)
            backing = self.entity_backing[bn_id]
            self._artifact_seq += 1
            artifact = EnrichmentArtifact(
                artifact_id=f"label:{self._artifact_seq}",
                kind="label",
                targets=[backing],
                payload=text.strip(),
            )
            self.enrichments[artifact.artifact_id] = artifact
            self._reindex_entity(bn_id)
            self._save_state()
            return artifact.to_doc()

    def add_group(self, name: str, members: Iterable[str]) -> dict:
        members = list(members)
        if not name or not name.strip():
            raise CurationError("group name must be non-empty")
        if not members:
            raise CurationError("a group needs at least one member")
        with self._lock:
            bn_ids = [self.resolve(m) for m in members]
            self._artifact_seq += 1
            artifact = EnrichmentArtifact(
                artifact_id=f"group:{self._artifact_seq}",
                kind="group",
                targets=sorted({self.entity_backing[b] for b in bn_ids}),
                payload=name.strip(),
            )
            self.enrichments[artifact.artifact_id] = artifact
            for bn_id in bn_ids:
                self._reindex_entity(bn_id)
            self._save_state()
            return artifact.to_doc()

    def enhance_modify(self, target: str, field: str, value: str) -> dict:
        """User field value: applied to the surrogate immediately (outranks
        discovery), plus a write-back plan to the traced contributor."""
        if not field:
            raise CurationError("field name must be non-empty")
        with self._lock:
            bn_id = self.resolve(target)
            entity = self.entities[bn_id]
            backing = self.entity_backing[bn_id]
            self._enhancement_seq += 1
            enhancement = Enhancement(
                enhancement_id=f"enh:{self._enhancement_seq}",
                op=OP_MODIFY,
                target=bn_id,
                overlay_key=backing,
                field=field,
                value=value,
            )

            if entity.attributes.get(field, "") == value:
                enhancement.warning = "no-op: value unchanged"
                self.enhancements[enhancement.enhancement_id] = enhancement
                self._save_state()
                return enhancement.to_doc()

            surrogate = self._surrogate_for(backing)
            contributor = (
                surrogate.source_contributions.get(field) if surrogate else None
            )
            if contributor is None:
                enhancement.warning = (
                    "surface-only: field has no traced source contributor"
                )
            else:
                record = self.store.get(contributor)
                enhancement.plans = [
                    WriteBackPlan(
                        origin=contributor.origin,
                        edits=[_edit_for(record, field, value)],
                        enhancement_id=enhancement.enhancement_id,
                    )
                ]
            self.enhancements[enhancement.enhancement_id] = enhancement
            self.overlay.setdefault(backing, {})[field] = value
            self._apply_overlay_change(backing, {field})
            self._save_state()
            return enhancement.to_doc()

    def enhance_create(self, kind: str, origin: str, fields: Mapping[str, str]) -> dict:
        """Plan a new instance at an explicit source. The entity appears only
        after deploy + re-ingest; discovery stays the single path in."""
        if kind not in RAW_KIND_FOR_ENTITY:
            raise CurationError(f"unknown entity kind {kind!r}")
        payload = {str(k): str(v) for k, v in dict(fields).items()}
        local_id = payload.pop("id", None)
        if not any(v for v in payload.values()):
            raise CurationError("creation needs domain-specific field values")
        with self._lock:
            if origin not in self.sources.origins():
                raise CurationError(f"source origin {origin!r} is not registered")
            self._enhancement_seq += 1
            enhancement = Enhancement(
                enhancement_id=f"enh:{self._enhancement_seq}",
                op=OP_CREATE,
                descriptor={"kind": kind, "origin": origin, "fields": payload},
            )
            enhancement.plans = [
                WriteBackPlan(
                    origin=origin,
                    edits=[
                        RecordEdit(
                            op="upsert",
                            kind=RAW_KIND_FOR_ENTITY[kind],
                            local_id=local_id,
                            fields=payload,
                        )
                    ],
                    enhancement_id=enhancement.enhancement_id,
                )
            ]
            self.enhancements[enhancement.enhancement_id] = enhancement
            self._save_state()
            return enhancement.to_doc()

    def enhance_delete(self, target: str) -> dict:
        """Plan removal of an entity's contributing records at their sources."""
        with self._lock:
            bn_id = self.resolve(target)
            self._enhancement_seq += 1
            enhancement = Enhancement(
                enhancement_id=f"enh:{self._enhancement_seq}",
                op=OP_DELETE,
                target=bn_id,
                overlay_key=self.entity_backing[bn_id],
            )
            edits_by_origin: dict[str, list[RecordEdit]] = {}
            for rendered in self.lineage.lineage(bn_id).sources:
                _, _, rest = rendered.partition(":")
                token, _, origin = rest.rpartition("@")
                if token.startswith("#"):
                    edit = RecordEdit(op="delete", match_hash=int(token[1:], 16))
                else:
                    edit = RecordEdit(op="delete", local_id=token)
                edits_by_origin.setdefault(origin, []).append(edit)
            enhancement.plans = [
                WriteBackPlan(origin=o, edits=e, enhancement_id=enhancement.enhancement_id)
                for o, e in sorted(edits_by_origin.items())
            ]
            self.enhancements[enhancement.enhancement_id] = enhancement
            self._save_state()
            return enhancement.to_doc()

    def deploy(self, enhancement_id: str) -> dict:
        """Push an enhancement's plans to the mock sources (journaled,
        idempotent per enhancement). Re-ingest is explicit, never automatic;
        the user value stays applied regardless of deployment success."""
        with self._lock:
            enhancement = self.enhancements.get(enhancement_id)
            if enhancement is None:
                raise KeyError(enhancement_id)
            failures = []
            for plan in enhancement.plans:
                try:
                    if self.sources.journal_contains(plan.origin, enhancement_id):
                        continue  # already deployed
                    self.sources.apply_edits(plan.origin, plan.edits)
                    self.sources.journal_append(
                        plan.origin,
                        enhancement_id,
                        {"edits": [e.to_doc() for e in plan.edits]},
                    )
                except (SourceError, OSError) as exc:
                    failures.append({"origin": plan.origin, "error": str(exc)})
            enhancement.status = STATUS_FAILED if failures else STATUS_DEPLOYED
            self._save_state()
            doc = enhancement.to_doc()
            if failures:
                doc["failures"] = failures
            return doc

    def enhancement_doc(self, enhancement_id: str) -> dict:
        enhancement = self.enhancements.get(enhancement_id)
        if enhancement is None:
            raise KeyError(enhancement_id)
        return enhancement.to_doc()

    def enhancements_doc(self) -> list[dict]:
        return [e.to_doc() for e in self.enhancements.values()]

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def search_doc(
        self,
        term: str | None = None,
        type_: str | None = None,
        field_filters: Mapping[str, str] | None = None,
        offset: int = 0,
        limit: int | None = None,
    ) -> dict:
        with self._lock:
            hits = search(
                self.entities, self.index, term, type_, field_filters, offset, limit
            )
            return {
                "results": [
                    {
                        "bn_id": entity.bn_id,
                        "kind": entity.kind,
                        "name": entity.name,
                        "score": score,
                    }
                    for entity, score in hits
                ],
                "total": len(hits),
            }

    def project_doc(self, name: str, show_paths: Iterable[str]) -> dict:
        with self._lock:
            bn_id = self.resolve(name)
            return project(
                bn_id, self.entities, self.index, list(show_paths), labels_of=self.labels_of
            )

    def neighbors_doc(self, name: str, kind: str | None = None) -> list[dict]:
        with self._lock:
            bn_id = self.resolve(name)
            found = neighbors(bn_id, self.entities, self.index, kind)
            return [e.to_doc() for e in found]

    def lineage_doc(self, name: str) -> dict:
        with self._lock:
            bn_id = self.resolve(name)
            return self.lineage.lineage(bn_id).to_doc()

    def export_doc(self) -> dict:
        with self._lock:
            ordered = sorted(self.entities.values(), key=lambda e: bn_sort_key(e.bn_id))
            plain = [e.to_doc() for e in ordered if e.kind != KIND_MESSAGE_FLOW]
            flows = [e.to_doc() for e in ordered if e.kind == KIND_MESSAGE_FLOW]
            for doc in plain + flows:
                doc["labels"] = self.labels_of(doc["bn_id"])
                doc["groups"] = self.groups_of(doc["bn_id"])
            return {
                "entities": plain,
                "flows": flows,
                "runs_on": [
                    {"participant": p, "host": h} for p, h in sorted(self.runs_on)
                ],
                "mappings": self.lineage.mapping_entries(),
            }

    def labels_of(self, bn_id: str) -> list[str]:
        backing = self.entity_backing.get(bn_id)
        return sorted(
            a.payload
            for a in self.enrichments.values()
            if a.kind == "label" and backing in a.targets
        )

    def groups_of(self, bn_id: str) -> list[str]:
        backing = self.entity_backing.get(bn_id)
        return sorted(
            a.payload
            for a in self.enrichments.values()
            if a.kind == "group" and backing in a.targets
        )

    def resolve(self, name: str) -> str:
        with self._lock:
            return resolve_name(name, self.entities, self.name_index)

    # ------------------------------------------------------------------
    # the commit pipeline (writer lane)
    # ------------------------------------------------------------------

    def _commit(self, changes: ChangeSet) -> None:
        self.partition.touched = set()
        self.diagnostics = Diagnostics()
        old_key_class = dict(self.key_class)
        old_class_members = dict(self.class_members)

        # -- phase 1: partition membership --------------------------------
        for record in changes.tombstoned:
            self.partition.remove_assertions_from_source(record.key)
            self._fact_assertions.pop(record.key, None)
            self.partition.remove_key(record.key)
        for key in changes.kind_changed:
            self.partition.remove_assertions_from_source(key)
            self._fact_assertions.pop(key, None)
            self.partition.remove_key(key)
        changed_keys = list(changes.created) + sorted(
            changes.kind_changed, key=lambda k: k.sort_key
        )
        for key in changed_keys:
            record = self.store.get(key)
            if record is None:
                continue
            category = CATEGORY_BY_KIND.get(record.kind)
            if category is not None:
                self.partition.add_key(key, category)

        # -- phase 2: assertions -------------------------------------------
        self._reconcile_fact_assertions()
        self._reconcile_user_assertions()
        self._maintain_rule_assertions(changes)

        # -- phase 3: class diffing ----------------------------------------
        touched = set(self.partition.touched)
        old_cids = {old_key_class[k] for k in touched if k in old_key_class}
        new_cids: set[str] = set()
        for key in sorted(touched, key=lambda k: k.sort_key):
            cid = self.partition.class_id_of(key)
            if cid is None:
                self.key_class.pop(key, None)
                continue
            if cid in new_cids:
                continue
            new_cids.add(cid)
            members = self.partition.members_of(key)
            self.class_members[cid] = members
            for member in members:
                self.key_class[member] = cid
        vanished = {
            cid for cid in old_cids - new_cids if not self._class_alive(cid)
        }
        for cid in vanished:
            self.class_members.pop(cid, None)

        membership_dirty = set(new_cids)
        value_dirty: dict[str, set[CompositeKey]] = {}
        for key in changes.updated:
            cid = self.key_class.get(key)
            if cid is not None and cid not in membership_dirty:
                value_dirty.setdefault(cid, set()).add(key)

        # -- phase 4: surrogates -------------------------------------------
        for cid in vanished:
            self.surrogates.pop(cid, None)
        for cid in sorted(membership_dirty):
            self._recompute_class_surrogate(cid, old_class_members.get(cid))
        for cid, keys in sorted(value_dirty.items()):
            self._delta_class_surrogate(cid, keys, changes.updated)

        # -- phase 5: class-backed entities ----------------------------------
        changed_entities: set[str] = set()
        removed_entities: set[str] = set()
        for cid in sorted(vanished):
            bn_id = self.backing_entity.get(cid)
            if bn_id is not None:
                removed_entities.add(bn_id)
                self._withdraw_entity(bn_id)
        for cid in sorted(membership_dirty | set(value_dirty)):
            bn_id, changed = self._materialize_class(cid)
            if bn_id is None:
                continue
            if changed == "removed":
                removed_entities.add(bn_id)
            elif changed:
                changed_entities.add(bn_id)

        # -- phase 6: flows and runs-on edges --------------------------------
        flow_changed, flow_removed = self._rebuild_flows()
        changed_entities |= flow_changed
        removed_entities |= flow_removed
        removed_entities -= set(self.entities)
        self._rebuild_runs_on()

        # -- phase 7: enrichment lifecycle -----------------------------------
        changed_entities |= self._prune_enrichments()

        # -- phase 8: index ---------------------------------------------------
        for bn_id in removed_entities:
            self.index.remove_entity(bn_id)
        for bn_id in sorted(changed_entities):
            self._reindex_entity(bn_id)
        self.index.set_adjacency(
            [e for e in self.entities.values() if e.kind == KIND_MESSAGE_FLOW],
            self.runs_on,
        )

        self.name_index = build_name_index(self.entities)
        self._save_state()

    # -- commit helpers -------------------------------------------------------

    def _class_alive(self, cid: str) -> bool:
        members = self.class_members.get(cid)
        if not members:
            return False
        return self.partition.class_id_of(next(iter(members))) == cid

    def _class_records(self, cid: str) -> list[RawRecord]:
        members = self.class_members.get(cid, frozenset())
        records = [self.store.get(k) for k in sorted(members, key=lambda k: k.sort_key)]
        return [r for r in records if r is not None]

    def _recompute_class_surrogate(
        self, cid: str, old_members: frozenset[CompositeKey] | None
    ) -> None:
        records = self._class_records(cid)
        if not records:
            self.surrogates.pop(cid, None)
            return
        enhancements = self.overlay.get(cid, {})
        previous = self.surrogates.get(cid)
        current = {r.key for r in records}

        if previous is not None and old_members and current < old_members:
            # pure shrink: walk the deletion fallback per removed member
            surrogate: Surrogate | None = previous
            for key in sorted(old_members - current, key=lambda k: k.sort_key):
                surrogate = on_member_removed(
                    surrogate, records, self.config.priorities, enhancements, key
                )
                if surrogate is None:
                    break
            if surrogate is not None:
                self.surrogates[cid] = surrogate
                self._maybe_retire(cid, surrogate)
                return
        surrogate = compute_surrogate(cid, records, self.config.priorities, enhancements)
        self.surrogates[cid] = surrogate
        self._maybe_retire(cid, surrogate)

    def _delta_class_surrogate(
        self,
        cid: str,
        keys: set[CompositeKey],
        updated: Mapping[CompositeKey, set[str]],
    ) -> None:
        records = self._class_records(cid)
        if not records:
            return
        enhancements = self.overlay.get(cid, {})
        surrogate = self.surrogates.get(cid)
        if surrogate is None:
            surrogate = compute_surrogate(cid, records, self.config.priorities, enhancements)
        else:
            fields = self._widened_fields(surrogate, keys, updated)
            surrogate = delta_update(
                surrogate, records, self.config.priorities, enhancements, fields
            )
        self.surrogates[cid] = surrogate
        self._maybe_retire(cid, surrogate)

    def _widened_fields(
        self,
        surrogate: Surrogate,
        keys: set[CompositeKey],
        updated: Mapping[CompositeKey, set[str]],
    ) -> set[str]:
        """Fields to re-select after value-level changes.

        A change can move a member's completeness rank, which may re-decide
        any field that member holds or used to contribute; fields involving
        only unaffected members never need a second look.
        """
        fields: set[str] = set()
        for key in keys:
            record = self.store.get(key)
            if record is None:
                continue
            raw_changed = set(updated.get(key, ()))
            structural = set(STRUCTURAL_FIELDS.get(record.kind, ()))
            if record.kind == KIND_PROP:
                structural |= {"key", "value"}
            fields |= raw_changed - structural
            fields |= set(contributable_fields(record))
            fields |= {
                name
                for name, contributor in surrogate.source_contributions.items()
                if contributor == key
            }
        return fields

    def _materialize_class(self, cid: str) -> tuple[str | None, str | bool]:
        surrogate = self.surrogates.get(cid)
        records = self._class_records(cid)
        bn_id = self.backing_entity.get(cid)
        kind = None
        if surrogate is not None and records:
            category = self.partition.category_of(records[0].key) or ""
            kind = class_entity_kind(records, category)
        if kind is None:
            if bn_id is not None:
                self._withdraw_entity(bn_id)
                return bn_id, "removed"
            return None, False
        old_entity = self.entities.get(bn_id) if bn_id is not None else None
        if old_entity is not None and old_entity.kind != kind:
            # the class re-kinded (its records changed kind): retire the old
            # entity; the new one gets a fresh, never-reused bn id
            self._withdraw_entity(bn_id)
        bn_id = self.allocator.allocate(kind, cid)
        entity = entity_from_class(bn_id, kind, surrogate)
        old = self.entities.get(bn_id)
        self.entities[bn_id] = entity
        self.entity_backing[bn_id] = cid
        self.backing_entity[cid] = bn_id
        self.lineage.put(lineage_record(bn_id, records, surrogate))
        changed = old is None or old.to_doc() != entity.to_doc()
        return bn_id, changed

    def _surrogate_for(self, backing: str) -> Surrogate | None:
        return self.surrogates.get(backing) or self.flow_surrogates.get(backing)

    def _maybe_retire(self, backing: str, surrogate: Surrogate) -> None:
        """Retire a deployed enhancement once the source value round-trips."""
        overlay = self.overlay.get(backing)
        if not overlay:
            return
        retired: list[str] = []
        for field, value in overlay.items():
            if surrogate.source_values.get(field) != value:
                continue
            deployed = any(
                e.op == OP_MODIFY
                and e.overlay_key == backing
                and e.field == field
                and e.status == STATUS_DEPLOYED
                for e in self.enhancements.values()
            )
            if deployed:
                retired.append(field)
        for field in retired:
            del overlay[field]
            surrogate.values[field] = surrogate.source_values[field]
            surrogate.contributions[field] = surrogate.source_contributions[field]
        if not overlay:
            self.overlay.pop(backing, None)

    def _apply_overlay_change(self, backing: str, fields: set[str]) -> None:
        """Re-select the given fields after an overlay mutation and refresh
        the entity, its lineage and its index entry."""
        bn_id = self.backing_entity.get(backing)
        if backing in self.surrogates:
            records = self._class_records(backing)
            surrogate = delta_update(
                self.surrogates[backing],
                records,
                self.config.priorities,
                self.overlay.get(backing, {}),
                fields,
            )
            self.surrogates[backing] = surrogate
            if bn_id is not None:
                entity = entity_from_class(bn_id, self.entities[bn_id].kind, surrogate)
                self.entities[bn_id] = entity
                self.lineage.put(lineage_record(bn_id, records, surrogate))
                self._reindex_entity(bn_id)
                self.name_index = build_name_index(self.entities)
        elif backing in self.flow_surrogates:
            group = self.flow_groups.get(backing)
            if group is None or bn_id is None:
                return
            surrogate = flow_surrogate(
                group, self.config.priorities, self.overlay.get(backing, {})
            )
            entity = flow_entity(bn_id, group, surrogate)
            self.flow_surrogates[backing] = surrogate
            self.entities[bn_id] = entity
            self.lineage.put(lineage_record(bn_id, group.members, surrogate))
            self._reindex_entity(bn_id)
            self.name_index = build_name_index(self.entities)

    def _reconcile_fact_assertions(self) -> None:
        """Declarative reconciliation of record-derived facts (same_* and
        prop attachments): recompute the desired set, apply the diff. Facts
        whose references do not resolve yet stay pending implicitly."""
        desired: dict[CompositeKey, dict[tuple, EquivalenceAssertion]] = {}
        for record in self.store.records():
            derived = self._derive_fact_assertions(record)
            if derived:
                desired[record.key] = {a.assertion_id: a for a in derived}

        for source, active_ids in list(self._fact_assertions.items()):
            wanted = desired.get(source, {})
            for aid in list(active_ids):
                if aid not in wanted:
                    self.partition.remove_assertion(aid)
                    active_ids.discard(aid)
            if not active_ids:
                del self._fact_assertions[source]

        for source, wanted in desired.items():
            active = self._fact_assertions.setdefault(source, set())
            for aid, assertion in wanted.items():
                if aid in active:
                    continue
                try:
                    self.partition.add_assertion(assertion)
                    active.add(aid)
                except ValueError as exc:
                    reason = str(exc)
                    if "unknown key" not in reason:
                        self._report_rejected(assertion, reason)
            if not active:
                self._fact_assertions.pop(source, None)

    def _derive_fact_assertions(self, record: RawRecord) -> list[EquivalenceAssertion]:
        if record.kind.startswith(SAME_PREFIX):
            keys = []
            for member_id in record.same_ids:
                key = self.store.resolve_reference(member_id, record.key.origin)
                if key is not None:
                    keys.append(key)
            keys.sort(key=lambda k: k.sort_key)
            return [
                EquivalenceAssertion(keys[i], keys[i + 1], PROVENANCE_FACT, record.key)
                for i in range(len(keys) - 1)
            ]
        if record.kind == KIND_PROP:
            target_ref = record.fields.get("target", "")
            if not target_ref:
                return []
            target = self.store.resolve_reference(target_ref, record.key.origin)
            if target is None or target == record.key:
                return []
            return [
                EquivalenceAssertion(record.key, target, PROVENANCE_FACT, record.key)
            ]
        return []

    def _reconcile_user_assertions(self) -> None:
        for assertion in self.user_assertions:
            if self.partition.has_assertion(assertion.assertion_id):
                continue
            try:
                self.partition.add_assertion(assertion)
            except ValueError as exc:
                if "unknown key" not in str(exc):
                    self._report_rejected(assertion, str(exc))

    def _maintain_rule_assertions(self, changes: ChangeSet) -> None:
        if not self.config.rules:
            return
        rule_kinds = {rule.kind for rule in self.config.rules}
        changed_records = []
        for key in (
            list(changes.created) + list(changes.updated) + list(changes.kind_changed)
        ):
            record = self.store.get(key)
            if record is not None and record.kind in rule_kinds:
                changed_records.append(record)
        if not changed_records:
            return
        for record in changed_records:
            for aid in self.partition.assertion_ids_of(record.key):
                if str(aid[2]).startswith("rule:"):
                    self.partition.remove_assertion(aid)
        candidates = {kind: self.store.records_of_kind(kind) for kind in rule_kinds}
        for assertion in apply_rules(changed_records, self.config.rules, candidates):
            try:
                self.partition.add_assertion(assertion)
            except ValueError as exc:
                if "unknown key" not in str(exc):
                    self._report_rejected(assertion, str(exc))

    def _report_rejected(self, assertion: EquivalenceAssertion, reason: str) -> None:
        self.diagnostics.rejected_assertions.append(
            {
                "pair": [str(assertion.member_a), str(assertion.member_b)],
                "provenance": assertion.provenance,
                "reason": reason,
            }
        )

    def _rebuild_flows(self) -> tuple[set[str], set[str]]:
        groups, pending = infer_message_flows(
            self.store.records_of_kind(KIND_OUT),
            self.store.records_of_kind(KIND_RSYS),
            self._resolve_participant,
        )
        self.diagnostics.pending_flows = [
            {"key": str(key), "reason": reason} for key, reason in pending
        ]

        changed: set[str] = set()
        removed: set[str] = set()
        new_groups: dict[str, FlowGroup] = {}
        for group in groups:
            bn_id = self.allocator.allocate(KIND_MESSAGE_FLOW, group.group_key)
            surrogate = flow_surrogate(
                group, self.config.priorities, self.overlay.get(group.group_key)
            )
            self._maybe_retire(group.group_key, surrogate)
            entity = flow_entity(bn_id, group, surrogate)
            old = self.entities.get(bn_id)
            new_groups[group.group_key] = group
            self.flow_surrogates[group.group_key] = surrogate
            self.entities[bn_id] = entity
            self.entity_backing[bn_id] = group.group_key
            self.backing_entity[group.group_key] = bn_id
            new_lineage = lineage_record(bn_id, group.members, surrogate)
            try:
                old_lineage = self.lineage.lineage(bn_id)
            except KeyError:
                old_lineage = None
            if old is None or old.to_doc() != entity.to_doc() or old_lineage != new_lineage:
                changed.add(bn_id)
            self.lineage.put(new_lineage)

        for group_key in list(self.flow_groups):
            if group_key not in new_groups:
                bn_id = self.backing_entity.get(group_key)
                if bn_id is not None:
                    removed.add(bn_id)
                    self._withdraw_entity(bn_id)
                self.flow_surrogates.pop(group_key, None)
        self.flow_groups = new_groups
        return changed, removed

    def _resolve_participant(self, ref: str, origin: str) -> str | None:
        return self._entity_for_reference(ref, origin, KIND_PARTICIPANT)

    def _rebuild_runs_on(self) -> None:
        edges: set[tuple[str, str]] = set()
        skipped: list[dict] = []
        for record in sorted(
            self.store.records_of_kind(KIND_RUNS_ON), key=lambda r: r.key.sort_key
        ):
            participant = self._entity_for_reference(
                record.fields.get("sys", ""), record.key.origin, KIND_PARTICIPANT
            )
            host = self._entity_for_reference(
                record.fields.get("host", ""), record.key.origin, KIND_HOST_ENTITY
            )
            if participant is None or host is None:
                skipped.append(
                    {"key": str(record.key), "reason": "dangling runs_on reference"}
                )
                continue
            edges.add((participant, host))
        self.runs_on = sorted(edges)
        self.diagnostics.skipped_edges = skipped

    def _entity_for_reference(
        self, ref: str, origin: str, expected_kind: str
    ) -> str | None:
        if not ref:
            return None
        key = self.store.resolve_reference(ref, origin)
        if key is None:
            return None
        cid = self.partition.class_id_of(key)
        if cid is None:
            return None
        bn_id = self.backing_entity.get(cid)
        if bn_id is None:
            return None
        entity = self.entities.get(bn_id)
        if entity is None or entity.kind != expected_kind:
            return None
        return bn_id

    def _prune_enrichments(self) -> set[str]:
        """Drop artifacts whose backing classes vanished; an artifact's
        lifecycle follows the class it is attached to."""
        touched: set[str] = set()
        for artifact_id, artifact in list(self.enrichments.items()):
            live = [
                t
                for t in artifact.targets
                if self.backing_entity.get(t) in self.entities
            ]
            if len(live) == len(artifact.targets):
                continue
            if not live:
                del self.enrichments[artifact_id]
            else:
                artifact.targets = live
            for target in live:
                bn_id = self.backing_entity.get(target)
                if bn_id is not None:
                    touched.add(bn_id)
        return touched

    def _withdraw_entity(self, bn_id: str) -> None:
        self.entities.pop(bn_id, None)
        backing = self.entity_backing.pop(bn_id, None)
        if backing is not None and self.backing_entity.get(backing) == bn_id:
            self.backing_entity.pop(backing, None)
        self.lineage.remove(bn_id)
        self.index.remove_entity(bn_id)

    def _reindex_entity(self, bn_id: str) -> None:
        entity = self.entities.get(bn_id)
        if entity is not None:
            self.index.index_entity(
                entity, self.labels_of(bn_id) + self.groups_of(bn_id)
            )

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def state_doc(self) -> dict:
        records = []
        for record in self.store.records():
            doc: dict = {
                "origin": record.key.origin,
                "kind": record.kind,
                "fields": dict(record.fields),
            }
            if record.key.local_id is not None:
                doc["id"] = record.key.local_id
            else:
                doc["hash"] = f"{record.key.content_hash:016x}"
            records.append(doc)
        records.sort(key=lambda d: (d["origin"], d.get("id", d.get("hash", ""))))
        return {
            "version": STATE_VERSION,
            "records": records,
            "user_assertions": [
                {"a": _key_doc(a.member_a), "b": _key_doc(a.member_b)}
                for a in self.user_assertions
            ],
            "allocator": self.allocator.to_doc(),
            "overlay": {k: dict(v) for k, v in self.overlay.items()},
            "enrichments": [a.to_doc() for a in self.enrichments.values()],
            "enhancements": [e.to_doc() for e in self.enhancements.values()],
            "artifact_seq": self._artifact_seq,
            "enhancement_seq": self._enhancement_seq,
        }

    def _save_state(self) -> None:
        if not self._persist:
            return
        path = self.config.resolved_state_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        staged = path.with_suffix(path.suffix + ".tmp")
        staged.write_text(json.dumps(self.state_doc(), sort_keys=True), encoding="utf-8")
        staged.replace(path)  # commit is atomic; a crash never truncates state

    def load_state(self) -> bool:
        """Restore inputs from the state file and rebuild the derived state."""
        path = self.config.resolved_state_path()
        if not path.is_file():
            return False
        doc = json.loads(path.read_text(encoding="utf-8"))
        with self._lock:
            self.allocator = IdAllocator.from_doc(doc.get("allocator", {}))
            self.overlay = {
                str(k): {str(f): str(v) for f, v in fields.items()}
                for k, fields in doc.get("overlay", {}).items()
            }
            self.enrichments = {
                a["artifact_id"]: EnrichmentArtifact.from_doc(a)
                for a in doc.get("enrichments", [])
            }
            self.enhancements = {
                e["enhancement_id"]: Enhancement.from_doc(e)
                for e in doc.get("enhancements", [])
            }
            self._artifact_seq = int(doc.get("artifact_seq", 0))
            self._enhancement_seq = int(doc.get("enhancement_seq", 0))
            self.user_assertions = [
                EquivalenceAssertion(
                    _key_from_doc(a["a"]), _key_from_doc(a["b"]), PROVENANCE_USER
                )
                for a in doc.get("user_assertions", [])
            ]
            changes = ChangeSet()
            for record_doc in doc.get("records", []):
                key, _, _ = self.store.upsert_record(
                    record_doc["origin"],
                    record_doc["kind"],
                    record_doc.get("id"),
                    record_doc.get("fields", {}),
                )
                changes.created.append(key)
            self._commit(changes)
        return True


def _edit_for(record: RawRecord | None, field: str, value: str) -> RecordEdit:
    """Record-level edit realizing a field enhancement at its contributor."""
    if record is None:
        raise CurationError("contributor record is gone")
    raw_field = field
    if record.kind == KIND_PROP and record.fields.get("key") == field:
        raw_field = "value"
    if record.key.local_id is not None:
        return RecordEdit(
            op="set_fields",
            kind=record.kind,
            local_id=record.key.local_id,
            fields={raw_field: value},
        )
    return RecordEdit(
        op="set_fields",
        kind=record.kind,
        match_hash=record.key.content_hash,
        fields={raw_field: value},
    )


def _key_doc(key: CompositeKey) -> dict:
    if key.local_id is not None:
        return {"origin": key.origin, "id": key.local_id}
    return {"origin": key.origin, "hash": f"{key.content_hash:016x}"}


def _key_from_doc(doc: Mapping) -> CompositeKey:
    if "id" in doc:
        return CompositeKey(str(doc["origin"]), local_id=str(doc["id"]))
    return CompositeKey(str(doc["origin"]), content_hash=int(doc["hash"], 16))
