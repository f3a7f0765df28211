"""Raw data layer: composite identity, inbound merging, snapshot ingestion.

Records never merge across origins here; identifying equivalent records from
different sources is the job of the equivalence layer on top.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .kernels import canonical_string, content_hash
from .keys import CompositeKey

KIND_SYS = "sys"
KIND_RSYS = "rsys"
KIND_OUT = "out"
KIND_PROP = "prop"
KIND_HOST = "host"
KIND_RUNS_ON = "runs_on"
SAME_PREFIX = "same_"

REGISTERED_KINDS = {
    KIND_SYS,
    KIND_RSYS,
    KIND_OUT,
    KIND_PROP,
    KIND_HOST,
    KIND_RUNS_ON,
    "same_sys",
    "same_host",
}

# Which kinds form equivalence classes, and in which category. Classes never
# span categories; prop fragments attach to the sys-backed participant class
# they complement.
CATEGORY_PARTICIPANT = "participant"
CATEGORY_HOST = "host"
CATEGORY_BY_KIND = {
    KIND_SYS: CATEGORY_PARTICIPANT,
    KIND_PROP: CATEGORY_PARTICIPANT,
    KIND_HOST: CATEGORY_HOST,
}
CATEGORY_BY_SAME_KIND = {"same_sys": CATEGORY_PARTICIPANT, "same_host": CATEGORY_HOST}

# Reference-carrying fields per kind; excluded from attribute merging.
STRUCTURAL_FIELDS = {
    KIND_PROP: {"target"},
    KIND_OUT: {"from", "to"},
    KIND_RSYS: {"sys"},
    KIND_RUNS_ON: {"sys", "host"},
}

SAME_ID_SEPARATORS = ("+", ",")


@dataclass
class RawRecord:
    key: CompositeKey
    kind: str
    fields: dict[str, str]  # normalized: no empty values (empty = absent)
    load_seq: int

    @property
    def same_ids(self) -> list[str]:
        """Member ids of a same_* fact."""
        ids = self.fields.get("ids", "")
        return ids.split(",") if ids else []


def contributable_fields(record: RawRecord) -> dict[str, str]:
    """The fields a record can contribute to a surrogate.

    Structural reference fields never contribute. A prop fragment written in
    key/value form contributes the single field it names.
    """
    structural = STRUCTURAL_FIELDS.get(record.kind, set())
    if record.kind == KIND_PROP and record.fields.get("key"):
        out = {record.fields["key"]: record.fields.get("value", "")}
        extra_structural = structural | {"key", "value"}
        out.update(
            {n: v for n, v in record.fields.items() if n not in extra_structural}
        )
        return {n: v for n, v in out.items() if v}
    if record.kind.startswith(SAME_PREFIX):
        return {}
    return {n: v for n, v in record.fields.items() if v and n not in structural}


@dataclass
class IngestReport:
    origin: str
    created: int = 0
    updated: int = 0
    unchanged: int = 0
    tombstoned: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "origin": self.origin,
            "created": self.created,
            "updated": self.updated,
            "unchanged": self.unchanged,
            "tombstoned": self.tombstoned,
            "rejected": [{"line": n, "reason": r} for n, r in self.rejected],
        }


@dataclass
class ChangeSet:
    """Commit input for the inference layers."""

    created: list[CompositeKey] = field(default_factory=list)
    updated: dict[CompositeKey, set[str]] = field(default_factory=dict)
    tombstoned: list[RawRecord] = field(default_factory=list)
    kind_changed: set[CompositeKey] = field(default_factory=set)

    def is_empty(self) -> bool:
        return not (self.created or self.updated or self.tombstoned)


class IngestError(RuntimeError):
    """Snapshot-level ingestion failure; the store is left unchanged."""


class RawStore:
    """In-memory conform raw data layer, single writer."""

    def __init__(self) -> None:
        self._records: dict[CompositeKey, RawRecord] = {}
        self._by_origin: dict[str, dict[str, CompositeKey]] = {}
        self._load_seq = 0

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: CompositeKey) -> RawRecord | None:
        return self._records.get(key)

    def records(self) -> Iterator[RawRecord]:
        return iter(self._records.values())

    def records_of_kind(self, kind: str) -> list[RawRecord]:
        return [r for r in self._records.values() if r.kind == kind]

    def origins(self) -> list[str]:
        return sorted(o for o, keys in self._by_origin.items() if keys)

    def resolve_reference(self, ref: str, default_origin: str) -> CompositeKey | None:
        """Resolve a field-value reference (``id`` or ``origin::id``)."""
        if "::" in ref:
            origin, local_id = ref.split("::", 1)
        else:
            origin, local_id = default_origin, ref
        return self._by_origin.get(origin, {}).get(local_id)

    def canonical_dump(self) -> list[str]:
        """Canonical serialization of the store contents, ignoring load_seq."""
        lines = [
            f"{record.key}|{canonical_string(record.kind, record.fields)}"
            for record in self._records.values()
        ]
        return sorted(lines)

    # -- mutation ---------------------------------------------------------

    def upsert_record(
        self,
        origin: str,
        kind: str,
        local_id: str | None = None,
        fields: Mapping[str, str] | None = None,
        *,
        ids: Iterable[str] | None = None,
        clear_absent: bool = False,
    ) -> tuple[CompositeKey, str, set[str]]:
        """Insert or inbound-merge one record.

        Returns (key, status, changed field names) with status one of
        created / updated / unchanged. ``clear_absent`` selects full-snapshot
        semantics: the incoming field map replaces the stored one.
        """
        if not origin:
            raise ValueError("origin must be non-empty")
        if not kind:
            raise ValueError("kind must be non-empty")
        incoming = {n: str(v) for n, v in (fields or {}).items()}

        if ids is not None:
            if local_id is not None:
                raise ValueError("same_* records take ids, not a local id")
            members = sorted(str(i) for i in ids)
            if len(members) < 2:
                raise ValueError(f"{kind} needs at least 2 ids")
            for member in members:
                if not member:
                    raise ValueError(f"{kind} ids must be non-empty")
                if any(sep in member for sep in SAME_ID_SEPARATORS):
                    raise ValueError(f"{kind} id {member!r} contains a reserved separator")
            local_id = "+".join(members)
            incoming["ids"] = ",".join(members)

        self._load_seq += 1
        if local_id is not None:
            key = CompositeKey(origin, local_id=local_id)
            existing = self._records.get(key)
            if existing is None:
                record = RawRecord(key, kind, _non_empty(incoming), self._load_seq)
                self._store(record)
                return key, "created", set(record.fields)
            if clear_absent:
                merged = _non_empty(incoming)
            else:  # delta: non-empty values overwrite, empty values never clear
                merged = {**existing.fields, **_non_empty(incoming)}
            changed = _diff_fields(existing.fields, merged)
            if existing.kind != kind or changed:
                status = "updated"
            else:
                status = "unchanged"
            self._records[key] = RawRecord(key, kind, merged, self._load_seq)
            return key, status, changed

        cleaned = _non_empty(incoming)
        if not cleaned:
            raise ValueError("a record needs a local id or at least one non-empty field")
        key = CompositeKey(origin, content_hash=content_hash(kind, cleaned))
        if key in self._records:
            old = self._records[key]
            self._records[key] = RawRecord(key, old.kind, old.fields, self._load_seq)
            return key, "unchanged", set()
        record = RawRecord(key, kind, cleaned, self._load_seq)
        self._store(record)
        return key, "created", set(record.fields)

    def delete_record(self, key: CompositeKey) -> RawRecord | None:
        record = self._records.pop(key, None)
        if record is not None:
            self._by_origin.get(key.origin, {}).pop(key.token, None)
        return record

    def ingest_snapshot(
        self, origin: str, snapshot_lines: Iterable[str], mode: str = "full"
    ) -> tuple[IngestReport, ChangeSet]:
        """Line-by-line ingest of one snapshot. Malformed lines are reported,
        not fatal; in full mode, this origin's records absent from the
        snapshot are tombstoned."""
        if mode not in ("full", "delta"):
            raise IngestError(f"unknown ingest mode {mode!r}")
        if not origin:
            raise IngestError("origin must be non-empty")

        report = IngestReport(origin=origin)
        planned: list[tuple[int, dict]] = []
        for line_no, line in enumerate(snapshot_lines, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                planned.append((line_no, _parse_line(text, origin)))
            except ValueError as exc:
                report.rejected.append((line_no, str(exc)))

        changes = ChangeSet()
        seen: set[CompositeKey] = set()
        for line_no, parsed in planned:
            prior = None
            if parsed.get("id") is not None:
                prior = self.get(CompositeKey(origin, local_id=parsed["id"]))
            try:
                key, status, changed = self.upsert_record(
                    origin,
                    parsed["kind"],
                    parsed.get("id"),
                    parsed.get("fields", {}),
                    ids=parsed.get("ids"),
                    clear_absent=(mode == "full"),
                )
            except ValueError as exc:
                report.rejected.append((line_no, str(exc)))
                continue
            seen.add(key)
            if prior is not None and prior.kind != parsed["kind"]:
                changes.kind_changed.add(key)
            if status == "created":
                report.created += 1
                if key in changes.updated:
                    # resurrected within one snapshot after an earlier update
                    changes.updated[key] |= changed
                else:
                    changes.created.append(key)
            elif status == "updated":
                report.updated += 1
                if key not in changes.created:
                    changes.updated.setdefault(key, set()).update(changed)
            else:
                report.unchanged += 1

        if mode == "full":
            stale = [
                key
                for token, key in self._by_origin.get(origin, {}).items()
                if key not in seen
            ]
            for key in sorted(stale, key=lambda k: k.sort_key):
                record = self.delete_record(key)
                if record is not None:
                    changes.tombstoned.append(record)
                    report.tombstoned += 1

        return report, changes

    # -- internals --------------------------------------------------------

    def _store(self, record: RawRecord) -> None:
        self._records[record.key] = record
        self._by_origin.setdefault(record.key.origin, {})[record.key.token] = record.key


def _non_empty(fields: Mapping[str, str]) -> dict[str, str]:
    return {n: v for n, v in fields.items() if v}


def _diff_fields(old: Mapping[str, str], new: Mapping[str, str]) -> set[str]:
    return {n for n in set(old) | set(new) if old.get(n, "") != new.get(n, "")}


def _parse_line(text: str, origin: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}")
    if not isinstance(doc, dict):
        raise ValueError("record line must be a JSON object")
    kind = doc.get("kind")
    if not isinstance(kind, str) or not kind:
        raise ValueError("missing record kind")
    line_origin = doc.get("origin")
    if line_origin is not None and line_origin != origin:
        raise ValueError(f"record origin {line_origin!r} does not match snapshot origin {origin!r}")

    parsed: dict = {"kind": kind}
    if kind.startswith(SAME_PREFIX):
        ids = doc.get("ids")
        if not isinstance(ids, list) or len(ids) < 2:
            raise ValueError(f"{kind} record needs an ids list with at least 2 entries")
        parsed["ids"] = [str(i) for i in ids]
    else:
        local_id = doc.get("id")
        if local_id is not None:
            if not isinstance(local_id, str) or not local_id:
                raise ValueError("id must be a non-empty string")
            if local_id.startswith("#"):
                raise ValueError("id must not start with '#' (reserved for content hashes)")
            if "::" in local_id:
                raise ValueError("id must not contain '::' (reserved for qualified references)")
            if "@" in local_id:
                raise ValueError("id must not contain '@' (reserved for key rendering)")
            parsed["id"] = local_id

    raw_fields = doc.get("fields", {})
    if not isinstance(raw_fields, dict):
        raise ValueError("fields must be an object")
    fields: dict[str, str] = {}
    for name, value in raw_fields.items():
        if isinstance(value, (dict, list)):
            raise ValueError(f"field {name!r} must be a scalar")
        fields[str(name)] = "" if value is None else str(value)
    parsed["fields"] = fields

    if kind.startswith(SAME_PREFIX):
        pass
    elif "id" not in parsed and not _non_empty(fields):
        raise ValueError("a record needs an id or at least one non-empty field")
    return parsed
