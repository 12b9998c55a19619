"""Thread-count resolution and an order-preserving parallel map.

The compiled kernels release the GIL, so a thread pool is enough to use
several cores without pickling arrays across processes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "BIFCURRENT_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument, then ``BIFCURRENT_THREADS``, then the CPU count."""
    if threads is None:
        env = os.environ.get(ENV_VAR)
        if env:
            threads = int(env)
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError("thread count must be positive")
    return threads


def pmap(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` evaluated on a thread pool, in input order."""
    items = list(items)
    n = min(resolve_threads(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
