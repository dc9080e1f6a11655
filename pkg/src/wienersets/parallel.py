"""Replicate-parallel execution with order-independent results."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def map_replicates(fn: Callable[[int], object], n: int, threads: int = 1) -> list:
    """[fn(0), ..., fn(n-1)] in replicate order, computed on ``threads`` workers.

    Each replicate draws from its own streams, so the list is identical for
    any worker count; callers reduce it in index order.
    """
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def ordered_sum(values: Sequence) -> float:
    """Left-to-right sum; the order is fixed by replicate index."""
    acc = 0.0
    for v in values:
        acc += v
    return acc
