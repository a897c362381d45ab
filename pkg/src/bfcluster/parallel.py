"""Deterministic worker pool for data-parallel phases.

Work is always cut into the same chunks regardless of how many workers run
them, and results come back in chunk order, so outputs never depend on the
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "BFC_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value is None:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {value!r}")
    if workers < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {value!r}")
    return workers


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return default_workers()
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return int(workers)


def chunk_ranges(n: int, size: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into consecutive ``(start, stop)`` blocks of ``size``."""
    if size < 1:
        raise ValueError("chunk size must be positive")
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def pmap(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], workers: int | None = None) -> list[R]:
    """Apply ``fn`` to every item, preserving input order.

    With one worker this is a plain loop; otherwise a thread pool is used.
    numpy releases the GIL inside its kernels, which is where the time goes.
    """
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
