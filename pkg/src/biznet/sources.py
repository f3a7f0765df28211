"""File-based mock source adapters.

A source is a directory ``<root>/<origin>/`` holding sequenced snapshots
``snapshot-<seq>.jsonl`` (one JSON record per line) and an append-only
``deploy.journal``. Write-back plans rewrite the latest snapshot into the
next sequence number; re-ingesting then closes the loop.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .kernels import content_hash

_SNAPSHOT_RE = re.compile(r"^snapshot-(\d+)\.jsonl$")


class SourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RecordEdit:
    """One record-level edit of a write-back plan.

    op: set_fields | delete | upsert. Existing records are matched by local
    id, or by content hash for records without one (match_hash); editing a
    hash-identified record necessarily changes its identity.
    """

    op: str
    kind: str | None = None
    local_id: str | None = None
    match_hash: int | None = None
    fields: dict | None = None

    def to_doc(self) -> dict:
        doc: dict = {"op": self.op}
        if self.kind is not None:
            doc["kind"] = self.kind
        if self.local_id is not None:
            doc["id"] = self.local_id
        if self.match_hash is not None:
            doc["match_hash"] = f"{self.match_hash:016x}"
        if self.fields is not None:
            doc["fields"] = dict(self.fields)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "RecordEdit":
        match_hash = doc.get("match_hash")
        return cls(
            op=doc["op"],
            kind=doc.get("kind"),
            local_id=doc.get("id"),
            match_hash=int(match_hash, 16) if match_hash is not None else None,
            fields=doc.get("fields"),
        )


class SourceDirectory:
    """Adapter over one mock source tree."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def origins(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def origin_dir(self, origin: str, create: bool = False) -> Path:
        path = self.root / origin
        if create:
            path.mkdir(parents=True, exist_ok=True)
        elif not path.is_dir():
            raise SourceError(f"unknown origin {origin!r} under {self.root}")
        return path

    def latest_snapshot(self, origin: str) -> tuple[int, Path] | None:
        best: tuple[int, Path] | None = None
        for path in self.origin_dir(origin).iterdir():
            match = _SNAPSHOT_RE.match(path.name)
            if match:
                seq = int(match.group(1))
                if best is None or seq > best[0]:
                    best = (seq, path)
        return best

    def read_snapshot(self, origin: str, seq: int | None = None) -> list[str]:
        if seq is None:
            latest = self.latest_snapshot(origin)
            if latest is None:
                raise SourceError(f"origin {origin!r} has no snapshots")
            path = latest[1]
        else:
            path = self.origin_dir(origin) / f"snapshot-{seq}.jsonl"
            if not path.is_file():
                raise SourceError(f"missing snapshot {path}")
        return path.read_text(encoding="utf-8").splitlines()

    def write_snapshot(self, origin: str, seq: int, lines: list[str]) -> Path:
        path = self.origin_dir(origin, create=True) / f"snapshot-{seq}.jsonl"
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    # -- write-back -------------------------------------------------------

    def apply_edits(self, origin: str, edits: list[RecordEdit]) -> int:
        """Apply plan edits to the latest snapshot, writing the next one.
        Returns the new sequence number."""
        latest = self.latest_snapshot(origin)
        if latest is None:
            seq, lines = 0, []
        else:
            seq, path = latest
            lines = path.read_text(encoding="utf-8").splitlines()

        parsed: list[dict | str] = []
        for line in lines:
            text = line.strip()
            if not text:
                continue
            try:
                parsed.append(json.loads(text))
            except json.JSONDecodeError:
                parsed.append(line)  # preserved verbatim

        for edit in edits:
            parsed = _apply_edit(parsed, edit, origin)

        new_lines = [
            json.dumps(doc, sort_keys=True) if isinstance(doc, dict) else doc
            for doc in parsed
        ]
        self.write_snapshot(origin, seq + 1, new_lines)
        return seq + 1

    # -- journal ----------------------------------------------------------

    def journal_path(self, origin: str) -> Path:
        return self.origin_dir(origin) / "deploy.journal"

    def journal_entries(self, origin: str) -> list[dict]:
        path = self.journal_path(origin)
        if not path.is_file():
            return []
        entries = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entries.append(json.loads(line))
        return entries

    def journal_contains(self, origin: str, enhancement_id: str) -> bool:
        return any(
            e.get("enhancement_id") == enhancement_id
            for e in self.journal_entries(origin)
        )

    def journal_append(self, origin: str, enhancement_id: str, summary: dict) -> None:
        entry = {
            "enhancement_id": enhancement_id,
            "deployed_at": datetime.now(timezone.utc).isoformat(),
            **summary,
        }
        with self.journal_path(origin).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _apply_edit(parsed: list, edit: RecordEdit, origin: str) -> list:
    if edit.op == "upsert":
        doc = {"kind": edit.kind, "origin": origin, "fields": dict(edit.fields or {})}
        if edit.local_id is not None:
            doc["id"] = edit.local_id
            for i, existing in enumerate(parsed):
                if isinstance(existing, dict) and existing.get("id") == edit.local_id:
                    parsed[i] = doc
                    return parsed
        parsed.append(doc)
        return parsed

    out = []
    for doc in parsed:
        if not isinstance(doc, dict) or not _matches(doc, edit):
            out.append(doc)
            continue
        if edit.op == "delete":
            continue
        if edit.op == "set_fields":
            fields = {str(k): v for k, v in (doc.get("fields") or {}).items()}
            for name, value in (edit.fields or {}).items():
                if value:
                    fields[name] = value
                else:
                    fields.pop(name, None)
            doc = {**doc, "fields": fields}
        out.append(doc)
    return out


def _matches(doc: dict, edit: RecordEdit) -> bool:
    if edit.local_id is not None:
        return doc.get("id") == edit.local_id
    if edit.match_hash is not None:
        if doc.get("id") is not None:
            return False
        fields = {
            str(k): ("" if v is None else str(v))
            for k, v in (doc.get("fields") or {}).items()
        }
        return content_hash(str(doc.get("kind", "")), fields) == edit.match_hash
    return False
