"""User curation: surface-only enrichment and source-affecting enhancement.

Labels and groups live in the queryable network space (indexed, searchable)
but are never deployed to sources. Enhancements change the network
immediately (user values outrank discovery) and carry write-back plans that
re-deploy the change to the owning source; deploying is explicit, and so is
re-ingesting afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Mapping

from .sources import RecordEdit

STATUS_PENDING = "pending"
STATUS_DEPLOYED = "deployed"
STATUS_FAILED = "failed"

OP_CREATE = "create"
OP_MODIFY = "modify"
OP_DELETE = "delete"


class CurationError(ValueError):
    pass


@dataclass
class EnrichmentArtifact:
    """A label on one entity or a named group of entities, keyed by the
    backing class ids so it survives reloads; its lifecycle follows them."""

    artifact_id: str
    kind: str  # label | group
    targets: list[str]  # overlay keys (class ids / flow group keys)
    payload: str

    def to_doc(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "kind": self.kind,
            "targets": list(self.targets),
            "payload": self.payload,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "EnrichmentArtifact":
        return cls(
            artifact_id=str(doc["artifact_id"]),
            kind=str(doc["kind"]),
            targets=[str(t) for t in doc["targets"]],
            payload=str(doc["payload"]),
        )


@dataclass
class WriteBackPlan:
    origin: str
    edits: list[RecordEdit]
    enhancement_id: str

    def to_doc(self) -> dict:
        return {
            "origin": self.origin,
            "edits": [e.to_doc() for e in self.edits],
            "enhancement_id": self.enhancement_id,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "WriteBackPlan":
        return cls(
            origin=str(doc["origin"]),
            edits=[RecordEdit.from_doc(e) for e in doc["edits"]],
            enhancement_id=str(doc["enhancement_id"]),
        )


@dataclass
class Enhancement:
    enhancement_id: str
    op: str  # create | modify | delete
    target: str | None = None  # bn id for modify/delete
    overlay_key: str | None = None  # class id / flow group key
    field: str | None = None
    value: str | None = None
    descriptor: dict = dc_field(default_factory=dict)  # create payload
    status: str = STATUS_PENDING
    plans: list[WriteBackPlan] = dc_field(default_factory=list)
    warning: str | None = None

    def to_doc(self) -> dict:
        return {
            "enhancement_id": self.enhancement_id,
            "op": self.op,
            "target": self.target,
            "overlay_key": self.overlay_key,
            "field": self.field,
            "value": self.value,
            "descriptor": dict(self.descriptor),
            "status": self.status,
            "plans": [p.to_doc() for p in self.plans],
            "warning": self.warning,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "Enhancement":
        return cls(
            enhancement_id=str(doc["enhancement_id"]),
            op=str(doc["op"]),
            target=doc.get("target"),
            overlay_key=doc.get("overlay_key"),
            field=doc.get("field"),
            value=doc.get("value"),
            descriptor=dict(doc.get("descriptor") or {}),
            status=str(doc.get("status", STATUS_PENDING)),
            plans=[WriteBackPlan.from_doc(p) for p in doc.get("plans", [])],
            warning=doc.get("warning"),
        )


# Entity kind -> raw record kind written by enhance_create.
RAW_KIND_FOR_ENTITY = {"Participant": "sys", "Host": "host", "MessageFlow": "out"}
