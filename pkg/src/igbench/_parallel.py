from __future__ import annotations

from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Any


def map_ordered(fn: Callable[[Any], Any], items: Iterable[Any], workers: int = 1) -> list[Any]:
    """Map ``fn`` over ``items`` and return results in input order.

    ``workers > 1`` fans out over processes; ``fn`` and items must pickle.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
