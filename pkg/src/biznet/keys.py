"""Composite record identity: (origin, local id | content hash)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CompositeKey:
    """Identity of a raw record: its origin plus either the source-local id
    or a 64-bit content hash (exactly one of the two)."""

    origin: str
    local_id: str | None = None
    content_hash: int | None = None

    def __post_init__(self) -> None:
        if not self.origin:
            raise ValueError("origin must be non-empty")
        if (self.local_id is None) == (self.content_hash is None):
            raise ValueError("exactly one of local_id / content_hash must be set")

    @property
    def token(self) -> str:
        if self.local_id is not None:
            return self.local_id
        return f"#{self.content_hash:016x}"

    @property
    def sort_key(self) -> tuple[str, str]:
        return (self.origin, self.token)

    @property
    def instance_ref(self) -> str:
        """``origin::token`` form used by instance-level priority overrides."""
        return f"{self.origin}::{self.token}"

    def __str__(self) -> str:
        return f"{self.token}@{self.origin}"


def render_key(kind: str, key: CompositeKey) -> str:
    """External rendering used in key mappings and lineage: ``kind:token@origin``."""
    return f"{kind}:{key}"


def split_reference(ref: str, default_origin: str) -> tuple[str, str]:
    """Resolve a field-value reference to (origin, local_id).

    References are origin-local by default; the qualified form
    ``origin::local_id`` crosses origins.
    """
    if "::" in ref:
        origin, local_id = ref.split("::", 1)
        return origin, local_id
    return default_origin, ref
