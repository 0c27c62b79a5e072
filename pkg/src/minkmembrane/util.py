"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "MINKMEMBRANE_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        nt = int(raw)
    except ValueError as err:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from err
    if nt < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1, got {nt}")
    return nt


def parallel_map(fn, items):
    """map() over independent tasks, results in input order.

    Honors MINKMEMBRANE_THREADS.  Each task must not mutate shared
    state; results are collected in index order, so the output (and any
    reduction folded over it) is identical for every thread count.
    """
    items = list(items)
    nt = min(thread_count(), len(items)) or 1
    if nt == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nt) as pool:
        return list(pool.map(fn, items))
