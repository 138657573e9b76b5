"""Order-preserving process-pool map used by the sweeps."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Iterable, workers: Optional[int] = None) -> list:
    """``[fn(x) for x in items]``, computed on ``workers`` processes.

    Results always come back in input order.  With one worker nothing is
    forked, which keeps tracebacks readable.
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
