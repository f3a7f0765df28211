#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import random
import string
import time

from biznet import _kernels_py

try:
    from biznet import _kernels
except ImportError:
    _kernels = None


def bench(fn, payloads, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        for payload in payloads:
            fn(payload)
        best = min(best, time.perf_counter() - started)
    return best


def human_rate(n_items: int, seconds: float) -> str:
    return f"{n_items / seconds / 1e6:6.2f} M ops/s   ({seconds * 1e9 / n_items:8.1f} ns/op)"


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--items", type=int, default=20000)
    args = parser.parse_args()

    rng = random.Random(42)
    hash_payloads = [
        ("sys|description=%s|location=%s" % (
            "".join(rng.choices(string.ascii_letters, k=rng.randint(4, 40))),
            "".join(rng.choices(string.ascii_letters, k=rng.randint(4, 20))),
        )).encode()
        for _ in range(args.items)
    ]
    token_payloads = [
        " ".join(
            "".join(rng.choices(string.ascii_letters + string.digits + "-_.:", k=rng.randint(2, 12)))
            for _ in range(rng.randint(1, 10))
        )
        for _ in range(args.items)
    ]

    rows = [("pure-python fnv1a64", _kernels_py.fnv1a64, hash_payloads),
            ("pure-python tokenize", _kernels_py.tokenize, token_payloads)]
    if _kernels is not None:
        rows += [("compiled    fnv1a64", _kernels.fnv1a64, hash_payloads),
                 ("compiled    tokenize", _kernels.tokenize, token_payloads)]
    else:
        print("compiled kernels not built; showing fallback only")

    results = {}
    for name, fn, payloads in rows:
        seconds = bench(fn, payloads, args.repeat)
        results[name] = seconds
        print(f"{name:24s} {human_rate(len(payloads), seconds)}")

    if _kernels is not None:
        for op in ("fnv1a64", "tokenize"):
            speedup = results[f"pure-python {op}"] / results[f"compiled    {op}"]
            print(f"{op}: compiled is {speedup:.1f}x faster")


if __name__ == "__main__":
    main()
