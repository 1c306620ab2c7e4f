"""Deterministic chunked thread maps.

Work is split into contiguous chunks and results are merged in chunk
order, so output never depends on the thread count or scheduling.  Every
chunk function must be independent of chunk boundaries (elementwise or
per-item work only).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(requested: int | None) -> int:
    if requested is None or requested <= 0:
        return os.cpu_count() or 1
    return requested


def split_ranges(n: int, parts: int) -> list[tuple[int, int]]:
    """Split [0, n) into at most `parts` contiguous near-equal ranges."""
    parts = max(1, min(parts, n)) if n else 1
    bounds = [n * k // parts for k in range(parts + 1)]
    return [(bounds[k], bounds[k + 1]) for k in range(parts)
            if bounds[k + 1] > bounds[k]]


def thread_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map fn over items, in order; sequential when threads <= 1."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
