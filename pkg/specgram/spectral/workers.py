"""Ordered thread-pool mapping for independent numeric tasks."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from ..config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    return max(1, threads if threads is not None else get_settings().threads)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply ``fn`` to every item; results keep the input order whatever the pool size."""
    work = list(items)
    n_jobs = min(resolve_threads(threads), max(1, len(work)))
    if n_jobs == 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, work))
