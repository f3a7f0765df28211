# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot kernels: content hashing and index tokenization.

Must match biznet._kernels_py exactly; the parity tests enforce it.
"""

from libc.stdint cimport uint64_t

cdef extern from "Python.h":
    bint Py_UNICODE_ISALNUM(Py_UCS4 ch)


def fnv1a64(bytes data):
    """64-bit FNV-1a over raw bytes."""
    cdef const unsigned char* buf = data
    cdef Py_ssize_t i, n = len(data)
    cdef uint64_t h = 0xCBF29CE484222325ULL
    for i in range(n):
        h = (h ^ <uint64_t> buf[i]) * 0x100000001B3ULL
    return h


def tokenize(str text):
    """Case-folded maximal runs of alphanumeric characters."""
    cdef str folded = text.casefold()
    cdef Py_ssize_t i = 0, start, n = len(folded)
    cdef list out = []
    while i < n:
        if Py_UNICODE_ISALNUM(<Py_UCS4> folded[i]):
            start = i
            i += 1
            while i < n and Py_UNICODE_ISALNUM(<Py_UCS4> folded[i]):
                i += 1
            out.append(folded[start:i])
        else:
            i += 1
    return out
