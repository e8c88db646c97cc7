from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "DECAYKIT_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, then ``DECAYKIT_THREADS``, then the core count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def pmap(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Ordered map over a thread pool; output order never depends on scheduling."""
    items = list(items)
    n = min(resolve_threads(threads), max(len(items), 1))
    if n == 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(func, items))
