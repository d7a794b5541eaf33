"""Deterministic chunked execution.

Work is always split into the same fixed-size chunks whatever the thread
count, and each chunk writes a disjoint slice, so results never depend on
scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "SPHRF_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def chunk_bounds(n: int, chunk: int):
    return [(start, min(start + chunk, n)) for start in range(0, n, chunk)]


def run_chunks(fn, n: int, chunk: int, threads: int | None = None) -> None:
    """Call ``fn(index, start, stop)`` for every chunk of ``range(n)``."""
    threads = default_threads() if threads is None else max(1, int(threads))
    bounds = chunk_bounds(n, chunk)
    if threads == 1 or len(bounds) == 1:
        for i, (a, b) in enumerate(bounds):
            fn(i, a, b)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, i, a, b) for i, (a, b) in enumerate(bounds)]
        for f in futures:
            f.result()
