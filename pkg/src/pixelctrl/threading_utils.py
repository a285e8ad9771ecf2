"""Deterministic batch partitioning across worker threads.

Work is always split into contiguous, disjoint env ranges, and every range
writes only its own output slice, so results never depend on the thread
count or schedule. Executors are cached per thread count; the kernels they
run release the GIL (numba ``nogil``), so the threads genuinely overlap.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

__all__ = ["max_threads", "parallel_over_ranges"]

_POOLS: dict[int, ThreadPoolExecutor] = {}


def max_threads() -> int:
    return os.cpu_count() or 1


def _pool(threads: int) -> ThreadPoolExecutor:
    pool = _POOLS.get(threads)
    if pool is None:
        pool = ThreadPoolExecutor(max_workers=threads)
        _POOLS[threads] = pool
    return pool


def parallel_over_ranges(n: int, threads: int, fn: Callable[[int, int], None]) -> None:
    """Invoke ``fn(lo, hi)`` over a disjoint cover of range(n)."""
    threads = max(1, min(threads, n))
    if threads == 1:
        fn(0, n)
        return
    chunk = (n + threads - 1) // threads
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    futures = [_pool(threads).submit(fn, lo, hi) for lo, hi in bounds]
    for f in futures:
        f.result()
