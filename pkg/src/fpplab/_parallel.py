"""Replica fan-out helper.

Workers are top-level functions applied to picklable argument tuples, so
replicas can run in separate processes. Results always come back in input
order, which makes aggregation independent of worker count.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Apply ``fn`` to each item, optionally across worker processes.

    With threads <= 1 the work runs inline. Output order matches input
    order regardless of the worker count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
