"""Order-preserving fan-out over processes.

Results always come back in input order, so worker count never changes what a
caller computes. ``POMMER_WORKERS`` overrides the default worker count.
"""

from __future__ import annotations

import multiprocessing as mp
import os


def resolve_workers(default: int = 1) -> int:
    """Configured worker count, unless ``POMMER_WORKERS`` says otherwise."""
    env = os.environ.get("POMMER_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, int(default))


def map_ordered(fn, items, workers: int = 1, chunksize: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally spread over ``workers`` processes.

    ``fn`` must be a picklable top-level function. Spawned (not forked)
    processes keep workers independent of whatever the parent has imported.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    ctx = mp.get_context("spawn")
    with ctx.Pool(min(workers, len(items))) as pool:
        return pool.map(fn, items, chunksize=chunksize)
