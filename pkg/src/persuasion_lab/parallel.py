"""Worker-count handling. ``PERSUASION_LAB_THREADS`` caps the pool size."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "PERSUASION_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return min(n, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Order-preserving map; serial unless more than one worker is allowed."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
