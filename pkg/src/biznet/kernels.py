"""Hot-kernel dispatch plus content-identity canonicalization.

The compiled extension is used when present; set BIZNET_PURE_PYTHON=1 to
force the pure-Python fallback (useful for parity testing and debugging).
"""

from __future__ import annotations

import os
from typing import Mapping

from . import _kernels_py

if os.environ.get("BIZNET_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

fnv1a64 = _impl.fnv1a64
tokenize = _impl.tokenize
USING_COMPILED_KERNELS = _impl is not _kernels_py


def canonical_string(kind: str, fields: Mapping[str, str]) -> str:
    """Canonical content form: ``kind|name=value|...`` with names sorted
    byte-wise ascending and empty-valued fields omitted."""
    names = sorted((n for n, v in fields.items() if v), key=lambda n: n.encode("utf-8"))
    return "|".join([kind] + [f"{n}={fields[n]}" for n in names])


def content_hash(kind: str, fields: Mapping[str, str]) -> int:
    """64-bit content identity for records without a local id."""
    return fnv1a64(canonical_string(kind, fields).encode("utf-8"))
