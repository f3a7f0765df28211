"""Pure-Python implementations of the hot kernels.

``biznet.kernels`` prefers the compiled variant (``biznet._kernels``) and
falls back to this module; the two must stay behaviour-identical (enforced
by the parity tests).
"""

from __future__ import annotations

from itertools import groupby

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Case-folded maximal runs of alphanumeric characters."""
    return ["".join(run) for alnum, run in groupby(text.casefold(), key=str.isalnum) if alnum]
